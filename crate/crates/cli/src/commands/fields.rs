//! `vortexiter fields`: inspect a VF3D snapshot and optionally dump it as CSV.
//!
//! A pure converter: it creates no output directory and writes no manifest.

use std::path::Path;

use vortexiter_core::io;

use crate::CliError;

pub fn run(input: &Path, csv: Option<&Path>) -> Result<(), CliError> {
    let (field, time) = io::read_field(input)?;
    let grid = field.grid();
    let n = grid.n();

    println!("file: {}", input.display());
    println!("n: {n}");
    println!("components: {}", field.components());
    println!("time: {time:.12e}");
    for c in 0..field.components() {
        let values = field.component(c);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        println!("component {c}: min={lo:.12e} max={hi:.12e}");
    }
    println!("sup_norm: {:.12e}", field.sup_norm());

    if let Some(csv_path) = csv {
        let h = grid.spacing();
        let mut text = format!(
            "i1,i2,i3,x1,x2,x3{}\n",
            (0..field.components())
                .map(|c| format!(",c{c}"))
                .collect::<String>()
        );
        for i1 in 0..n {
            for i2 in 0..n {
                for i3 in 0..n {
                    let idx = (i1 * n + i2) * n + i3;
                    text.push_str(&format!(
                        "{i1},{i2},{i3},{:.12e},{:.12e},{:.12e}",
                        i1 as f64 * h,
                        i2 as f64 * h,
                        i3 as f64 * h
                    ));
                    for c in 0..field.components() {
                        text.push_str(&format!(",{:.17e}", field.component(c)[idx]));
                    }
                    text.push('\n');
                }
            }
        }
        std::fs::write(csv_path, text).map_err(|e| {
            CliError::config(format!("cannot write {}: {e}", csv_path.display()))
        })?;
        println!("csv: {}", csv_path.display());
    }
    Ok(())
}
