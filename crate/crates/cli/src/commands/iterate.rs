//! `vortexiter iterate`: the fixed-point velocity iteration.

use std::path::PathBuf;

use vortexiter_core::field::PeriodicVectorField;
use vortexiter_core::grid::GridSpec;
use vortexiter_core::iterate::{
    estimate_t0, nondimensionalize, picard_iterate, theorem1_diagnostics, write_diagnostics_table_csv,
    write_iteration_csv, IterationConfig, PhysicalProblem,
};
use vortexiter_core::solver::write_diagnostics_csv;
use vortexiter_core::{flows, io, spectral};

use crate::commands::{prepare_out_dir, write_summary};
use crate::config::{self, Config};
use crate::CliError;

struct IterateSpec {
    out: PathBuf,
    preset: String,
    amplitude: f64,
    initial_velocity: Option<PathBuf>,
    n: usize,
    nu: f64,
    length: f64,
    dt: f64,
    /// None = auto (vorticity-based estimate).
    horizon: Option<f64>,
    tol: f64,
    max_iter: usize,
    c1: f64,
    dealias: bool,
    /// 0 = auto (about twelve stored snapshots).
    store_stride: usize,
    residual_probes: usize,
    with_pressure: bool,
}

impl IterateSpec {
    fn from_config(cfg: &mut Config) -> Result<(Self, PathBuf), CliError> {
        let out = prepare_out_dir(cfg)?;
        let spec = Self {
            out: out.clone(),
            preset: cfg.choice("preset", &["taylor-green", "file"], "taylor-green")?,
            amplitude: cfg.f64("amplitude", 0.1)?,
            initial_velocity: cfg.path("initial_velocity"),
            n: cfg.usize("n", 32)?,
            nu: cfg.f64("nu", 0.5)?,
            length: cfg.f64("length", 1.0)?,
            dt: cfg.f64("dt", 1e-3)?,
            horizon: cfg.f64_or_auto("T")?,
            tol: cfg.f64("tol", 1e-8)?,
            max_iter: cfg.usize("max_iter", 50)?,
            c1: cfg.f64("c1", 1.0)?,
            dealias: cfg.bool("dealias", true)?,
            store_stride: cfg.usize("store_stride", 0)?,
            residual_probes: cfg.usize("residual_probes", 10)?,
            with_pressure: cfg.bool("with_pressure", false)?,
        };
        if spec.preset == "file" && spec.initial_velocity.is_none() {
            return Err(CliError::config(
                "preset=file requires initial_velocity=<path.vf3d>",
            ));
        }
        Ok((spec, out))
    }

    fn initial_velocity_field(&self) -> Result<PeriodicVectorField, CliError> {
        match self.preset.as_str() {
            "taylor-green" => {
                let grid = GridSpec::new(self.n)?;
                Ok(flows::taylor_green(grid, self.amplitude))
            }
            "file" => {
                let path = self.initial_velocity.as_ref().expect("validated");
                let (field, _) = io::read_field(path)?;
                Ok(field)
            }
            other => unreachable!("choice() admits only known presets, got {other}"),
        }
    }

    fn resolved(&self, store_stride: usize) -> Vec<(String, String)> {
        let mut out = vec![
            ("out".to_string(), self.out.display().to_string()),
            ("preset".to_string(), self.preset.clone()),
            ("amplitude".to_string(), config::fmt_f64(self.amplitude)),
            ("n".to_string(), self.n.to_string()),
            ("nu".to_string(), config::fmt_f64(self.nu)),
            ("length".to_string(), config::fmt_f64(self.length)),
            ("dt".to_string(), config::fmt_f64(self.dt)),
            (
                "T".to_string(),
                // `auto` is echoed as-is: the estimate is recomputed from the
                // same inputs on a rerun, avoiding a scaled/physical
                // round-trip through floating point.
                match self.horizon {
                    Some(t) => config::fmt_f64(t),
                    None => "auto".to_string(),
                },
            ),
            ("tol".to_string(), config::fmt_f64(self.tol)),
            ("max_iter".to_string(), self.max_iter.to_string()),
            ("c1".to_string(), config::fmt_f64(self.c1)),
            ("dealias".to_string(), self.dealias.to_string()),
            ("store_stride".to_string(), store_stride.to_string()),
            (
                "residual_probes".to_string(),
                self.residual_probes.to_string(),
            ),
            ("with_pressure".to_string(), self.with_pressure.to_string()),
        ];
        if let Some(path) = &self.initial_velocity {
            out.push((
                "initial_velocity".to_string(),
                path.display().to_string(),
            ));
        }
        out
    }
}

pub fn run(mut cfg: Config) -> Result<(), CliError> {
    let (spec, out) = IterateSpec::from_config(&mut cfg)?;
    cfg.finish("iterate")?;

    let u0 = spec.initial_velocity_field()?;
    let problem = PhysicalProblem::new(spec.nu, spec.length, u0)?;

    // Resolve the horizon and snapshot stride up front so the manifest can
    // echo a concrete stride (the horizon stays `auto` when requested).
    let (u0_scaled, map) = nondimensionalize(&problem);
    let w0_scaled = spectral::curl(&u0_scaled)?;
    let horizon_scaled = match spec.horizon {
        Some(t) => map.to_scaled_time(t),
        None => {
            let t0 = estimate_t0(&w0_scaled, 0.5, 1.0, spec.c1);
            if !t0.is_finite() {
                return Err(CliError::config(
                    "zero initial vorticity has an unbounded horizon; set T explicitly",
                ));
            }
            t0
        }
    };
    let dt_scaled = map.to_scaled_time(spec.dt);
    let n_steps = ((horizon_scaled / dt_scaled - 1e-9).ceil().max(1.0)) as usize;
    let store_stride = if spec.store_stride == 0 {
        (n_steps / 12).max(1)
    } else {
        spec.store_stride
    };

    config::write_manifest(&out, "iterate", &spec.resolved(store_stride))?;

    let mut iter_cfg = IterationConfig::new(spec.dt);
    iter_cfg.horizon = spec.horizon;
    iter_cfg.tol = spec.tol;
    iter_cfg.max_iter = spec.max_iter;
    iter_cfg.c1 = spec.c1;
    iter_cfg.dealias = spec.dealias;
    iter_cfg.store_stride = store_stride;
    iter_cfg.residual_probes = spec.residual_probes;
    iter_cfg.with_pressure = spec.with_pressure;

    let report = picard_iterate(&problem, &iter_cfg)?;

    write_iteration_csv(out.join("iteration.csv"), &report.rows)?;
    let diag = theorem1_diagnostics(&report)?;
    write_diagnostics_table_csv(out.join("theorem_ratios.csv"), &diag)?;
    write_diagnostics_csv(
        out.join("step_diagnostics.csv"),
        report.trajectory.diagnostics(),
    )?;

    // Snapshots of the final iterate, in the normalized frame (unit period,
    // viscosity 1/2); summary.csv records the factors that undo the scaling.
    let times = report.trajectory.snapshot_times();
    let mut snap_index = String::from("index,t\n");
    for (i, &t) in times.iter().enumerate() {
        let w = &report.trajectory.vorticity()[i];
        let v = &report.trajectory.velocity()[i];
        io::write_field(w, t, out.join(format!("vorticity_{i:04}.vf3d")))?;
        io::write_field(v, t, out.join(format!("velocity_{i:04}.vf3d")))?;
        if let Some(pressure) = &report.pressure {
            io::write_field(&pressure[i], t, out.join(format!("pressure_{i:04}.vf3d")))?;
        }
        snap_index.push_str(&format!("{i},{:.12e}\n", t));
    }
    let snap_path = out.join("snapshots.csv");
    std::fs::write(&snap_path, snap_index)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", snap_path.display())))?;

    let last = report.rows.last().expect("at least one iteration row");
    let summary = vec![
        ("converged".to_string(), report.converged.to_string()),
        ("iterations".to_string(), report.rows.len().to_string()),
        ("delta_final".to_string(), config::fmt_f64(last.delta_n)),
        ("residual_final".to_string(), config::fmt_f64(last.residual)),
        (
            "horizon_scaled".to_string(),
            config::fmt_f64(report.horizon),
        ),
        (
            "horizon_physical".to_string(),
            config::fmt_f64(report.map.to_physical_time(report.horizon)),
        ),
        (
            "velocity_factor".to_string(),
            config::fmt_f64(report.map.velocity_factor),
        ),
        (
            "time_factor".to_string(),
            config::fmt_f64(report.map.time_factor),
        ),
        ("n_steps".to_string(), n_steps.to_string()),
        ("snapshots".to_string(), times.len().to_string()),
        ("w0_sup".to_string(), config::fmt_f64(report.w0_sup)),
        ("sup_u_ratio".to_string(), config::fmt_f64(diag.sup_u_ratio)),
        (
            "grad_u_ratio".to_string(),
            config::fmt_f64(diag.grad_u_ratio),
        ),
        ("sup_w_ratio".to_string(), config::fmt_f64(diag.sup_w_ratio)),
        (
            "grad_w_ratio".to_string(),
            config::fmt_f64(diag.grad_w_ratio),
        ),
    ];
    write_summary(&out, &summary)?;

    println!(
        "iterate: converged={} after {} iteration(s), delta={:.3e}, residual={:.3e} -> {}",
        report.converged,
        report.rows.len(),
        last.delta_n,
        last.residual,
        out.display()
    );
    Ok(())
}
