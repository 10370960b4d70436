//! `vortexiter verify`: numerical checks of the Gaussian-integral bounds and
//! the fitted kernel/vorticity envelopes.

use std::collections::BTreeMap;
use std::path::PathBuf;

use vortexiter_core::bounds::{
    check_gaussian_inequalities, check_integrated_bound, drift_grad_norm_series, i_closed_form,
    i_mc, standard_sweep, verify_gradient_envelope, verify_kernel_envelope,
    verify_vorticity_bounds, write_bound_reports_csv, BoundCheckReport, IntegratedBoundParams,
    VorticityBoundConfig,
};
use vortexiter_core::flows;
use vortexiter_core::grid::GridSpec;
use vortexiter_core::solver::{kernel_pde, solve_linearized_vorticity, SolveConfig};

use crate::commands::{prepare_out_dir, write_summary, DriftSpec};
use crate::config::{self, Config};
use crate::CliError;

/// Quadruples (alpha, beta, d) for the time-integrated bound; each satisfies
/// the exponent condition d (beta - 1) / (2 beta) + alpha / 2 < 1.
const INTEGRATED_CASES: [(f64, f64, usize); 4] =
    [(1.0, 2.0, 1), (1.0, 1.2, 3), (0.0, 1.5, 3), (0.0, 4.0, 1)];

struct VerifySpec {
    out: PathBuf,
    sweep: String,
    betas: Vec<f64>,
    alphas: Vec<f64>,
    dims: Vec<usize>,
    n_samples: u64,
    seed: u64,
    n: usize,
    pde_dt: f64,
    t_end: f64,
    w0_amplitude: f64,
    drift: DriftSpec,
}

impl VerifySpec {
    fn from_config(cfg: &mut Config) -> Result<Self, CliError> {
        let out = prepare_out_dir(cfg)?;
        let sweep = cfg.choice(
            "sweep",
            &["pointwise", "integrals", "envelopes", "all"],
            "pointwise",
        )?;
        let mut betas = cfg.f64_list("betas", &[1.5, 2.0, 4.0])?;
        betas.sort_by(f64::total_cmp);
        betas.dedup();
        let alphas = cfg.f64_list("alphas", &[0.0, 1.0, 2.0])?;
        let dims_raw = cfg.f64_list("dims", &[1.0, 2.0, 3.0])?;
        let dims = dims_raw
            .iter()
            .map(|&v| {
                let d = v as usize;
                if v.fract() != 0.0 || !(1..=3).contains(&d) {
                    Err(CliError::config(format!(
                        "dims entries must be 1, 2, or 3, got {v}"
                    )))
                } else {
                    Ok(d)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            out,
            sweep,
            betas,
            alphas,
            dims,
            n_samples: cfg.u64("n_samples", 200_000)?,
            seed: cfg.u64("seed", 1)?,
            n: cfg.usize("n", 16)?,
            pde_dt: cfg.f64("pde_dt", 0.004)?,
            t_end: cfg.f64("t_end", 0.05)?,
            w0_amplitude: cfg.f64("w0_amplitude", 0.3)?,
            drift: DriftSpec::from_config(cfg)?,
        })
    }

    fn resolved(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("out".to_string(), self.out.display().to_string()),
            ("sweep".to_string(), self.sweep.clone()),
            ("betas".to_string(), config::fmt_f64_list(&self.betas)),
            ("alphas".to_string(), config::fmt_f64_list(&self.alphas)),
            (
                "dims".to_string(),
                self.dims
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("n_samples".to_string(), self.n_samples.to_string()),
            ("seed".to_string(), self.seed.to_string()),
            ("n".to_string(), self.n.to_string()),
            ("pde_dt".to_string(), config::fmt_f64(self.pde_dt)),
            ("t_end".to_string(), config::fmt_f64(self.t_end)),
            (
                "w0_amplitude".to_string(),
                config::fmt_f64(self.w0_amplitude),
            ),
        ];
        rows.extend(self.drift.resolved());
        rows
    }
}

/// Lattice checks of the pointwise kernel-power inequalities plus the fixed
/// time-integrated cases.
fn pointwise_reports(spec: &VerifySpec) -> Result<Vec<BoundCheckReport>, CliError> {
    let mut reports = Vec::new();
    for &d in &spec.dims {
        reports.extend(check_gaussian_inequalities(d, &spec.betas, &spec.alphas)?);
    }
    let x = [0.15, 0.3, 0.55];
    let y = [0.4, 0.62, 0.2];
    for &(alpha, beta, d) in &INTEGRATED_CASES {
        let p = IntegratedBoundParams::new(alpha, beta, d, 0.1, 0.6, x, y)?;
        reports.push(check_integrated_bound(&p)?);
    }
    Ok(reports)
}

struct IntegralRow {
    alpha: f64,
    beta: f64,
    d: usize,
    tau: f64,
    s: f64,
    t: f64,
    dist: f64,
    closed: f64,
    mc: f64,
    std_err: f64,
    sigma_dist: f64,
    rel_err: f64,
    pass: bool,
}

/// Closed form against direct Monte Carlo over the standard parameter sweep.
fn integral_rows(spec: &VerifySpec) -> Result<Vec<IntegralRow>, CliError> {
    let mut rows = Vec::new();
    for (i, p) in standard_sweep().iter().enumerate() {
        let closed = i_closed_form(p);
        let est = i_mc(p, spec.n_samples, spec.seed.wrapping_add((i as u64) << 32))?;
        let abs = (closed - est.value).abs();
        let sigma_dist = if est.std_error > 0.0 {
            abs / est.std_error
        } else {
            0.0
        };
        rows.push(IntegralRow {
            alpha: p.alpha(),
            beta: p.beta(),
            d: p.d(),
            tau: p.tau(),
            s: p.s(),
            t: p.t(),
            dist: p.dist(),
            closed,
            mc: est.value,
            std_err: est.std_error,
            sigma_dist,
            rel_err: abs / closed.abs().max(f64::MIN_POSITIVE),
            pass: abs <= (3.0 * est.std_error).max(0.01 * closed.abs()),
        });
    }
    Ok(rows)
}

fn write_integrals_csv(path: &std::path::Path, rows: &[IntegralRow]) -> Result<(), CliError> {
    let mut text =
        String::from("alpha,beta,d,tau,s,t,dist,closed,mc,std_err,sigma_dist,rel_err,pass\n");
    for r in rows {
        text.push_str(&format!(
            "{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
            r.alpha, r.beta, r.d, r.tau, r.s, r.t, r.dist, r.closed, r.mc, r.std_err,
            r.sigma_dist, r.rel_err, r.pass,
        ));
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

/// Fits the kernel and vorticity envelopes for every beta on one shared pair
/// of solver runs, then checks that the beta-normalized constants shrink as
/// the envelope widens.
fn envelope_reports(spec: &VerifySpec) -> Result<Vec<BoundCheckReport>, CliError> {
    let grid = GridSpec::new(spec.n)?;
    let drift = spec.drift.build()?;
    let sup_b = drift.sup_abs();

    let mut solve = SolveConfig::new(spec.pde_dt, spec.t_end);
    solve.store_stride = 2;
    let xi = [0.25, 0.5, 0.75];
    let kernel_traj = kernel_pde(xi, &drift, grid, &solve)?;
    let kernel_grads = drift_grad_norm_series(&drift, grid, kernel_traj.snapshot_times())?;

    let w0 = flows::taylor_green_vorticity(grid, spec.w0_amplitude);
    let vort_traj = solve_linearized_vorticity(&w0, &drift, &solve)?;
    let vort_grads = drift_grad_norm_series(&drift, grid, vort_traj.snapshot_times())?;

    let mut reports = Vec::new();
    for &beta in &spec.betas {
        reports.push(verify_kernel_envelope(&kernel_traj, xi, sup_b, beta)?);
        reports.push(verify_gradient_envelope(
            &kernel_traj,
            xi,
            sup_b,
            &kernel_grads,
            beta,
        )?);
        let cfg = VorticityBoundConfig::new(beta, sup_b, vort_grads.clone());
        reports.extend(verify_vorticity_bounds(&vort_traj, &cfg)?);
    }

    // Wider envelopes can only need smaller constants once the beta^{3/2}
    // normalization of the Gaussian peak is divided out; check that per
    // family across the sorted betas.
    if spec.betas.len() >= 2 {
        let mut by_family: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (i, r) in reports.iter().enumerate() {
            if r.inequality_id == "norm_closure" {
                continue;
            }
            let beta = spec.betas[i / 7];
            by_family
                .entry(r.inequality_id.clone())
                .or_default()
                .push(r.c1_fit / beta.powf(1.5));
        }
        for (family, series) in by_family {
            let mut worst = 0.0_f64;
            let mut pass = true;
            for pair in series.windows(2) {
                let ratio = if pair[0] > 0.0 { pair[1] / pair[0] } else { 0.0 };
                worst = worst.max(ratio);
                pass &= pair[1] <= pair[0] * (1.0 + 1e-7);
            }
            reports.push(BoundCheckReport {
                inequality_id: format!("{family}_beta_monotone"),
                params: format!(
                    "{{\"family\":\"{family}\",\"betas\":\"{}\"}}",
                    config::fmt_f64_list(&spec.betas)
                ),
                max_ratio: worst,
                c1_fit: series[0],
                c2_fit: 0.0,
                pass,
            });
        }
    }
    Ok(reports)
}

pub fn run(mut cfg: Config) -> Result<(), CliError> {
    let spec = VerifySpec::from_config(&mut cfg)?;
    cfg.finish("verify")?;
    config::write_manifest(&spec.out, "verify", &spec.resolved())?;

    let run_pointwise = spec.sweep == "pointwise" || spec.sweep == "all";
    let run_integrals = spec.sweep == "integrals" || spec.sweep == "all";
    let run_envelopes = spec.sweep == "envelopes" || spec.sweep == "all";

    let mut reports = Vec::new();
    if run_pointwise {
        reports.extend(pointwise_reports(&spec)?);
    }
    if run_envelopes {
        reports.extend(envelope_reports(&spec)?);
    }
    if !reports.is_empty() {
        write_bound_reports_csv(spec.out.join("bounds.csv"), &reports)?;
    }

    let mut rows = Vec::new();
    if run_integrals {
        rows = integral_rows(&spec)?;
        write_integrals_csv(&spec.out.join("integrals.csv"), &rows)?;
    }

    let failed = reports.iter().filter(|r| !r.pass).count()
        + rows.iter().filter(|r| !r.pass).count();
    let summary = vec![
        ("sweep".to_string(), spec.sweep.clone()),
        ("n_reports".to_string(), reports.len().to_string()),
        ("n_integral_rows".to_string(), rows.len().to_string()),
        ("failed".to_string(), failed.to_string()),
        ("all_pass".to_string(), (failed == 0).to_string()),
    ];
    write_summary(&spec.out, &summary)?;

    println!(
        "verify: sweep={} reports={} integral_rows={} failed={} -> {}",
        spec.sweep,
        reports.len(),
        rows.len(),
        failed,
        spec.out.display()
    );
    if failed > 0 {
        return Err(CliError::Numeric(format!(
            "{failed} mandatory check(s) failed; see {}",
            spec.out.display()
        )));
    }
    Ok(())
}
