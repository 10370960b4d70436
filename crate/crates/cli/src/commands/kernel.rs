//! `vortexiter kernel`: transition-density estimates by Monte Carlo paths,
//! by the forward PDE, or both side by side.

use std::path::PathBuf;

use vortexiter_core::gaussian::{periodized_gaussian, GaussianKernelParams};
use vortexiter_core::grid::GridSpec;
use vortexiter_core::solver::{kernel_mollification_time, kernel_pde, KernelTrajectory, SolveConfig};
use vortexiter_core::stochastic::{
    bismut_gradient, free_kernel_evaluator, kernel_mc, write_estimates_csv,
    write_vector_estimates_csv, EstimateRow, SdeConfig, VectorEstimateRow,
};

use crate::commands::{prepare_out_dir, write_summary, wrap_unit, DriftSpec};
use crate::config::{self, Config};
use crate::CliError;

/// Decorrelates per-target seeds: path indices stay below 2^31, so spacing
/// base seeds by 2^32 keeps every per-path stream distinct.
fn target_seed(seed: u64, row: usize) -> u64 {
    seed.wrapping_add((row as u64) << 32)
}

fn gradient_seed(seed: u64, row: usize) -> u64 {
    seed.wrapping_add(((row as u64) << 32) | 0x8000_0000)
}

struct KernelSpec {
    out: PathBuf,
    drift: DriftSpec,
    method: String,
    xi: [f64; 3],
    t: f64,
    tau: f64,
    targets: Vec<[f64; 3]>,
    n_paths: u64,
    sde_dt: f64,
    seed: u64,
    periodize: bool,
    n: usize,
    pde_dt: f64,
    gradient: bool,
    t_mollify: f64,
}

impl KernelSpec {
    fn from_config(cfg: &mut Config) -> Result<Self, CliError> {
        let out = prepare_out_dir(cfg)?;
        let drift = DriftSpec::from_config(cfg)?;
        let method = cfg.choice("method", &["mc", "pde", "both"], "mc")?;
        let xi = cfg.triple("xi", [0.5, 0.5, 0.5])?;
        let t = cfg.f64("t", 0.1)?;
        let tau = cfg.f64("tau", 0.0)?;
        let targets = cfg.triples("targets")?.unwrap_or_else(|| {
            [
                [0.0, 0.0, 0.0],
                [0.125, 0.0, 0.0],
                [0.0, 0.125, 0.0],
                [0.0, 0.0, 0.125],
                [0.125, 0.125, 0.125],
            ]
            .iter()
            .map(|d| wrap_unit([xi[0] + d[0], xi[1] + d[1], xi[2] + d[2]]))
            .collect()
        });
        let n_paths = cfg.u64("n_paths", 100_000)?;
        let sde_dt = cfg.f64_or_auto("sde_dt")?;
        let seed = cfg.u64("seed", 1)?;
        let periodize = cfg.bool("periodize", true)?;
        let n = cfg.usize("n", 32)?;
        let pde_dt = cfg.f64("pde_dt", 1e-3)?;
        let gradient = cfg.bool("gradient", false)?;

        if !(t > tau) {
            return Err(CliError::config(format!(
                "need t > tau, got t={t} tau={tau}"
            )));
        }
        let grid = GridSpec::new(n)?;
        let t_mollify = kernel_mollification_time(grid);
        let span = t - tau;
        // The Monte Carlo leg matches the PDE leg's mollified start by
        // running slightly longer whenever both are produced.
        let mc_span = if method == "both" { span + t_mollify } else { span };
        let sde_dt = match sde_dt {
            Some(dt) => dt,
            None => mc_span / 100.0,
        };
        if gradient && drift.is_zero() == false && method == "mc" {
            return Err(CliError::config(
                "gradient with a nonzero drift needs method=pde or method=both \
                 (the Bismut weight divides by PDE kernel values)",
            ));
        }
        Ok(Self {
            out,
            drift,
            method,
            xi,
            t,
            tau,
            targets,
            n_paths,
            sde_dt,
            seed,
            periodize,
            n,
            pde_dt,
            gradient,
            t_mollify,
        })
    }

    fn span(&self) -> f64 {
        self.t - self.tau
    }

    fn mc_span(&self) -> f64 {
        if self.method == "both" {
            self.span() + self.t_mollify
        } else {
            self.span()
        }
    }

    fn resolved(&self) -> Vec<(String, String)> {
        let mut rows = vec![("out".to_string(), self.out.display().to_string())];
        rows.extend(self.drift.resolved());
        rows.extend([
            ("method".to_string(), self.method.clone()),
            ("xi".to_string(), config::fmt_triple(self.xi)),
            ("t".to_string(), config::fmt_f64(self.t)),
            ("tau".to_string(), config::fmt_f64(self.tau)),
            ("targets".to_string(), config::fmt_triples(&self.targets)),
            ("n_paths".to_string(), self.n_paths.to_string()),
            ("sde_dt".to_string(), config::fmt_f64(self.sde_dt)),
            ("seed".to_string(), self.seed.to_string()),
            ("periodize".to_string(), self.periodize.to_string()),
            ("n".to_string(), self.n.to_string()),
            ("pde_dt".to_string(), config::fmt_f64(self.pde_dt)),
            ("gradient".to_string(), self.gradient.to_string()),
        ]);
        rows
    }
}

/// Periodized heat kernel value at displacement `y - xi` after `span`.
fn analytic_reference(xi: [f64; 3], y: [f64; 3], span: f64) -> Result<f64, CliError> {
    let params = GaussianKernelParams::new(span, 3, 1.0)?;
    let z: Vec<f64> = (0..3)
        .map(|j| {
            let d = y[j] - xi[j];
            d - d.round()
        })
        .collect();
    Ok(periodized_gaussian(params, &z))
}

struct ComparisonRow {
    target: [f64; 3],
    t: f64,
    mc: Option<(f64, f64)>,
    pde: Option<f64>,
    reference: Option<f64>,
    pass: bool,
    abs_diff: f64,
    rel_diff: f64,
    sigma_dist: f64,
}

fn write_comparison(path: &std::path::Path, rows: &[ComparisonRow]) -> Result<(), CliError> {
    let mut text = String::from(
        "target_x,target_y,target_z,t,mc_value,mc_std_err,pde_value,reference,abs_diff,rel_diff,sigma_dist,pass\n",
    );
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
    for r in rows {
        text.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{},{},{},{},{:.17e},{:.17e},{:.17e},{}\n",
            r.target[0],
            r.target[1],
            r.target[2],
            r.t,
            opt(r.mc.map(|(v, _)| v)),
            opt(r.mc.map(|(_, s)| s)),
            opt(r.pde),
            opt(r.reference),
            r.abs_diff,
            r.rel_diff,
            r.sigma_dist,
            r.pass,
        ));
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

pub fn run(mut cfg: Config) -> Result<(), CliError> {
    let spec = KernelSpec::from_config(&mut cfg)?;
    cfg.finish("kernel")?;
    config::write_manifest(&spec.out, "kernel", &spec.resolved())?;

    let drift = spec.drift.build()?;
    let drift_is_zero = spec.drift.is_zero();
    let span = spec.span();
    let run_mc = spec.method == "mc" || spec.method == "both";
    let run_pde = spec.method == "pde" || spec.method == "both";

    // Monte Carlo estimates at every target.
    let mut mc_rows: Vec<EstimateRow> = Vec::new();
    if run_mc {
        let mc_span = spec.mc_span();
        let t_eval = spec.tau + mc_span;
        for (i, &y) in spec.targets.iter().enumerate() {
            let row_seed = target_seed(spec.seed, i);
            let sde = SdeConfig::new(spec.sde_dt, spec.n_paths as usize, row_seed)?;
            let est = kernel_mc(spec.tau, spec.xi, t_eval, y, &drift, &sde, spec.periodize)?;
            mc_rows.push(EstimateRow {
                target: y,
                t: t_eval,
                value: est.value,
                std_error: est.std_error,
                n_paths: est.n_paths,
                seed: row_seed,
            });
        }
        write_estimates_csv(spec.out.join("estimates_mc.csv"), &mc_rows)?;
    }

    // Forward PDE from the mollified point mass at xi.
    let mut pde_traj: Option<KernelTrajectory> = None;
    let mut pde_values: Vec<f64> = Vec::new();
    if run_pde {
        let grid = GridSpec::new(spec.n)?;
        let solve = SolveConfig::new(spec.pde_dt, span);
        let traj = kernel_pde(spec.xi, &drift, grid, &solve)?;
        pde_values = spec
            .targets
            .iter()
            .map(|&y| traj.value_at(y, span))
            .collect();
        let pde_rows: Vec<EstimateRow> = spec
            .targets
            .iter()
            .zip(&pde_values)
            .map(|(&y, &v)| EstimateRow {
                target: y,
                t: spec.t,
                value: v,
                std_error: 0.0,
                n_paths: 0,
                seed: spec.seed,
            })
            .collect();
        write_estimates_csv(spec.out.join("estimates_pde.csv"), &pde_rows)?;
        pde_traj = Some(traj);
    }

    // Side-by-side comparison whenever two routes to the same number exist:
    // MC vs PDE when both ran, otherwise either route vs the analytic
    // drift-free kernel.
    let mut all_pass = true;
    let mut compared = 0usize;
    if spec.method == "both" || drift_is_zero {
        let ref_span = if run_pde { span + spec.t_mollify } else { span };
        let mut rows = Vec::new();
        for (i, &y) in spec.targets.iter().enumerate() {
            let mc = mc_rows.get(i).map(|r| (r.value, r.std_error));
            let pde = pde_values.get(i).copied();
            let reference = if drift_is_zero {
                Some(analytic_reference(spec.xi, y, ref_span)?)
            } else {
                None
            };
            let (a, b, sigma) = if spec.method == "both" {
                let (m, s) = mc.expect("mc ran");
                (m, pde.expect("pde ran"), s)
            } else if let Some((m, s)) = mc {
                (m, reference.expect("zero drift"), s)
            } else {
                (pde.expect("pde ran"), reference.expect("zero drift"), 0.0)
            };
            let abs_diff = (a - b).abs();
            let rel_diff = abs_diff / b.abs().max(f64::MIN_POSITIVE);
            let sigma_dist = if sigma > 0.0 { abs_diff / sigma } else { 0.0 };
            let pass = abs_diff <= (3.0 * sigma).max(0.05 * b.abs());
            all_pass &= pass;
            compared += 1;
            rows.push(ComparisonRow {
                target: y,
                t: spec.t,
                mc,
                pde,
                reference,
                pass,
                abs_diff,
                rel_diff,
                sigma_dist,
            });
        }
        write_comparison(&spec.out.join("comparison.csv"), &rows)?;
    }

    // Score estimates (gradient of ln p in the endpoint) by the Bismut
    // formula; nonzero drifts take their kernel evaluators from the PDE leg.
    if spec.gradient {
        let half_span = span / 2.0;
        let n_grad_steps = (half_span / spec.sde_dt).round().max(1.0);
        let grad_dt = half_span / n_grad_steps;

        // One mid-horizon kernel evaluator shared by every target: analytic
        // for the drift-free case, a half-length PDE run otherwise.  (All
        // supported drifts are time-independent, so a nonzero tau shifts
        // the path clock but not the kernel.)
        let half_traj: Option<KernelTrajectory> = if drift_is_zero {
            None
        } else {
            let grid = GridSpec::new(spec.n)?;
            let solve = SolveConfig::new(spec.pde_dt, half_span);
            Some(kernel_pde(spec.xi, &drift, grid, &solve)?)
        };
        let kernel_half: Box<dyn Fn([f64; 3]) -> f64 + Sync> = match &half_traj {
            None => Box::new(free_kernel_evaluator(spec.xi, half_span)),
            Some(traj) => Box::new(move |y| traj.value_at(y, half_span)),
        };

        let mut grad_rows: Vec<VectorEstimateRow> = Vec::new();
        for (i, &x) in spec.targets.iter().enumerate() {
            let row_seed = gradient_seed(spec.seed, i);
            let sde = SdeConfig::new(grad_dt, spec.n_paths as usize, row_seed)?;
            // The Bismut weight needs the mid- and full-horizon kernels from
            // one and the same positive solution, so the drift-free branch
            // pairs the free-space evaluator with the free-space value.
            let full = if drift_is_zero {
                free_kernel_evaluator(spec.xi, span)(x)
            } else {
                let full_traj = pde_traj.as_ref().expect("pde ran for nonzero drift");
                full_traj.value_at(x, span)
            };
            let est = bismut_gradient(spec.tau, span, x, &drift, &kernel_half, full, &sde)?;
            grad_rows.push(VectorEstimateRow {
                target: x,
                t: spec.t,
                values: est.value,
                std_errors: est.std_error,
                n_paths: est.n_paths,
                seed: row_seed,
            });
        }
        write_vector_estimates_csv(spec.out.join("gradient_mc.csv"), &grad_rows)?;
    }

    let summary = vec![
        ("method".to_string(), spec.method.clone()),
        ("span".to_string(), config::fmt_f64(span)),
        ("mc_span".to_string(), config::fmt_f64(spec.mc_span())),
        ("t_mollify".to_string(), config::fmt_f64(spec.t_mollify)),
        ("n_targets".to_string(), spec.targets.len().to_string()),
        ("compared".to_string(), compared.to_string()),
        ("all_pass".to_string(), all_pass.to_string()),
    ];
    write_summary(&spec.out, &summary)?;

    println!(
        "kernel: method={} targets={} compared={} all_pass={} -> {}",
        spec.method,
        spec.targets.len(),
        compared,
        all_pass,
        spec.out.display()
    );
    Ok(())
}
