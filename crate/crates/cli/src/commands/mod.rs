pub mod fields;
pub mod iterate;
pub mod kernel;
pub mod verify;

use std::path::{Path, PathBuf};

use vortexiter_core::drift::{Drift, DriftHistory};
use vortexiter_core::io;

use crate::config::Config;
use crate::CliError;

/// Resolves the mandatory `out` key and creates the directory.
pub fn prepare_out_dir(cfg: &mut Config) -> Result<PathBuf, CliError> {
    let out = PathBuf::from(cfg.required_string("out")?);
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", out.display())))?;
    Ok(out)
}

/// The drift presets shared by `kernel` and `verify`: an analytic family or
/// a frozen field loaded from VF3D.
pub struct DriftSpec {
    pub preset: String,
    pub b_const: [f64; 3],
    pub amplitude: f64,
    pub field_path: Option<PathBuf>,
}

impl DriftSpec {
    pub fn from_config(cfg: &mut Config) -> Result<Self, CliError> {
        let preset = cfg.choice(
            "drift",
            &["zero", "const", "shear", "taylor-green", "file"],
            "zero",
        )?;
        let b_const = cfg.triple("b_const", [0.1, 0.0, 0.0])?;
        let amplitude = cfg.f64("amplitude", 0.1)?;
        let field_path = cfg.path("drift_field");
        if preset == "file" && field_path.is_none() {
            return Err(CliError::config(
                "drift=file requires drift_field=<path.vf3d>",
            ));
        }
        Ok(Self {
            preset,
            b_const,
            amplitude,
            field_path,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.preset == "zero"
    }

    pub fn build(&self) -> Result<Drift, CliError> {
        Ok(match self.preset.as_str() {
            "zero" => Drift::Zero,
            "const" => Drift::Constant(self.b_const),
            "shear" => Drift::Shear {
                amplitude: self.amplitude,
            },
            "taylor-green" => Drift::TaylorGreen {
                amplitude: self.amplitude,
            },
            "file" => {
                let path = self.field_path.as_ref().expect("checked in from_config");
                let (field, _) = io::read_field(path)?;
                Drift::History(DriftHistory::frozen(field)?)
            }
            other => unreachable!("choice() admits only known presets, got {other}"),
        })
    }

    /// Manifest entries for the resolved drift.
    pub fn resolved(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("drift".to_string(), self.preset.clone()),
            ("b_const".to_string(), crate::config::fmt_triple(self.b_const)),
            (
                "amplitude".to_string(),
                crate::config::fmt_f64(self.amplitude),
            ),
        ];
        if let Some(path) = &self.field_path {
            out.push(("drift_field".to_string(), path.display().to_string()));
        }
        out
    }
}

/// Writes `summary.csv`: two columns, key and value, one row per entry.
pub fn write_summary(out_dir: &Path, entries: &[(String, String)]) -> Result<(), CliError> {
    let mut text = String::from("key,value\n");
    for (k, v) in entries {
        text.push_str(k);
        text.push(',');
        text.push_str(v);
        text.push('\n');
    }
    let path = out_dir.join("summary.csv");
    std::fs::write(&path, text)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

/// Wraps coordinates into [0, 1) for torus-valued inputs.
pub fn wrap_unit(x: [f64; 3]) -> [f64; 3] {
    [
        x[0] - x[0].floor(),
        x[1] - x[1].floor(),
        x[2] - x[2].floor(),
    ]
}
