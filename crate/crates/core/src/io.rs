//! Field snapshot format "VF3D": a fixed little-endian binary layout for
//! bit-exact round trips.
//!
//! Layout: magic "VF3D" (4 bytes) | version u32 = 1 | n u32 | components u32
//! | time f64 | components * n^3 f64 samples, row-major with x3 fastest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::PeriodicVectorField;
use crate::grid::GridSpec;

const MAGIC: &[u8; 4] = b"VF3D";
const VERSION: u32 = 1;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes a field snapshot tagged with its simulation time.
pub fn write_field(f: &PeriodicVectorField, time: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC).map_err(|e| io_err(path, e))?;
    w.write_all(&VERSION.to_le_bytes())
        .map_err(|e| io_err(path, e))?;
    w.write_all(&(f.grid().n() as u32).to_le_bytes())
        .map_err(|e| io_err(path, e))?;
    w.write_all(&(f.components() as u32).to_le_bytes())
        .map_err(|e| io_err(path, e))?;
    w.write_all(&time.to_le_bytes()).map_err(|e| io_err(path, e))?;
    for v in f.data() {
        w.write_all(&v.to_le_bytes()).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a snapshot back, returning the field and its time tag.
pub fn read_field(path: impl AsRef<Path>) -> Result<(PeriodicVectorField, f64)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| io_err(path, e))?;
    if &magic != MAGIC {
        return Err(Error::BadMagic {
            path: path.display().to_string(),
        });
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(|e| io_err(path, e))?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(Error::BadVersion {
            path: path.display().to_string(),
            version,
        });
    }
    r.read_exact(&mut u32buf).map_err(|e| io_err(path, e))?;
    let n = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf).map_err(|e| io_err(path, e))?;
    let components = u32::from_le_bytes(u32buf) as usize;
    if components != 1 && components != 3 {
        return Err(Error::BadHeader {
            path: path.display().to_string(),
            field: "components",
            value: components as u64,
        });
    }
    let grid = GridSpec::new(n).map_err(|_| Error::BadHeader {
        path: path.display().to_string(),
        field: "n",
        value: n as u64,
    })?;

    let mut f64buf = [0u8; 8];
    r.read_exact(&mut f64buf).map_err(|e| io_err(path, e))?;
    let time = f64::from_le_bytes(f64buf);

    let count = components * grid.len();
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| io_err(path, e))?;
    if bytes.len() != 8 * count {
        return Err(Error::Truncated {
            path: path.display().to_string(),
            got: bytes.len(),
            expected: 8 * count,
        });
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let field = PeriodicVectorField::from_data(grid, components, data)?;
    Ok((field, time))
}
