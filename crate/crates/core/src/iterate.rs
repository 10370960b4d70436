//! Fixed-point construction of Navier-Stokes solutions: starting from the
//! frozen initial velocity, repeatedly solve the drift-linearized vorticity
//! equation and recover the velocity of its solution, until successive
//! velocity iterates agree in sup norm. Also houses the physical-to-
//! dimensionless scaling, the horizon estimate T0, pressure recovery, and
//! the diagnostic ratios that mirror the a priori velocity/vorticity
//! estimates.

use std::io::Write as IoWrite;
use std::path::Path;

use num_complex::Complex;

use crate::drift::{Drift, DriftHistory};
use crate::error::{Error, Result};
use crate::fft;
use crate::field::PeriodicVectorField;
use crate::solver::{self, SolveConfig, VorticityTrajectory};
use crate::spectral;

/// Relative tolerance on the structural invariants of input data
/// (solenoidality, zero mean).
const DATA_TOL: f64 = 1e-10;

/// A flow posed in physical units: period `length`, kinematic `viscosity`,
/// and an initial velocity sampled on the periodic grid (sample i sits at
/// physical position length * i / n).
#[derive(Debug, Clone)]
pub struct PhysicalProblem {
    pub viscosity: f64,
    pub length: f64,
    pub u0: PeriodicVectorField,
}

impl PhysicalProblem {
    /// Validates positivity of the parameters and the structure of the
    /// initial velocity (divergence-free, mean-zero).
    pub fn new(viscosity: f64, length: f64, u0: PeriodicVectorField) -> Result<Self> {
        if !(viscosity > 0.0 && viscosity.is_finite()) {
            return Err(Error::BadConfig(format!(
                "viscosity must be positive, got {viscosity}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::BadConfig(format!(
                "period length must be positive, got {length}"
            )));
        }
        if u0.components() != 3 {
            return Err(Error::WrongComponents {
                expected: 3,
                got: u0.components(),
            });
        }
        let scale = u0.sup_norm().max(1.0);
        let mean = u0.mean().iter().map(|m| m * m).sum::<f64>().sqrt();
        let div = spectral::max_abs_divergence(&u0)?;
        if mean > DATA_TOL * scale || div > DATA_TOL * scale {
            return Err(Error::BadVorticityData { mean, div });
        }
        Ok(Self {
            viscosity,
            length,
            u0,
        })
    }
}

/// The bijection between a physical problem and its unit-period, viscosity
/// 1/2 normalization: U(x, t) = velocity_factor * u(L x, t / time_factor),
/// t_scaled = time_factor * t_phys.
#[derive(Debug, Clone, Copy)]
pub struct ScalingMap {
    pub velocity_factor: f64,
    pub time_factor: f64,
}

impl ScalingMap {
    pub fn identity() -> Self {
        Self {
            velocity_factor: 1.0,
            time_factor: 1.0,
        }
    }

    pub fn for_problem(viscosity: f64, length: f64) -> Self {
        Self {
            velocity_factor: length / (2.0 * viscosity),
            time_factor: 2.0 * viscosity / (length * length),
        }
    }

    pub fn to_scaled_time(&self, t_phys: f64) -> f64 {
        self.time_factor * t_phys
    }

    pub fn to_physical_time(&self, t_scaled: f64) -> f64 {
        t_scaled / self.time_factor
    }

    /// Physical velocity samples -> dimensionless samples.
    pub fn scale_velocity(&self, u: &PeriodicVectorField) -> PeriodicVectorField {
        let mut out = u.clone();
        out.scale(self.velocity_factor);
        out
    }

    /// Dimensionless velocity samples -> physical samples.
    pub fn unscale_velocity(&self, u: &PeriodicVectorField) -> PeriodicVectorField {
        let mut out = u.clone();
        out.scale(1.0 / self.velocity_factor);
        out
    }
}

/// Normalizes a physical problem to the unit torus with viscosity 1/2.
/// The returned field is the dimensionless initial velocity; the map
/// converts times and amplitudes in both directions.
pub fn nondimensionalize(p: &PhysicalProblem) -> (PeriodicVectorField, ScalingMap) {
    let map = ScalingMap::for_problem(p.viscosity, p.length);
    (map.scale_velocity(&p.u0), map)
}

/// Existence-horizon estimate T0 = C1 nu^2 L^-4 ||w0||_inf^-2. The value is
/// dimensionless (nu^2 L^-4 cancels the units of |vorticity|^-2) and is read
/// as a time in the normalized frame. Zero vorticity yields +infinity.
pub fn estimate_t0(w0: &PeriodicVectorField, viscosity: f64, length: f64, c1: f64) -> f64 {
    let sup = w0.sup_norm();
    if sup == 0.0 {
        return f64::INFINITY;
    }
    c1 * viscosity * viscosity / (length.powi(4) * sup * sup)
}

/// Applies the solve-then-reconstruct map V once: solve the linearized
/// vorticity equation with drift `b` and initial vorticity `w0`, then return
/// the velocity of the solution at every step. `b` must start from the
/// velocity whose curl is `w0`.
pub fn apply_v(
    b: &DriftHistory,
    w0: &PeriodicVectorField,
    cfg: &SolveConfig,
) -> Result<DriftHistory> {
    let u0 = solver::reconstruct_velocity(w0)?;
    let start = b.field_at_index(0);
    let scale = u0.sup_norm().max(1.0);
    if start.sup_norm_distance(&u0) > DATA_TOL * scale {
        return Err(Error::BadConfig(
            "drift history must start from the velocity induced by w0".into(),
        ));
    }
    let traj = solver::solve_linearized_vorticity(w0, &Drift::History(b.clone()), cfg)?;
    Ok(traj.into_velocity_history())
}

/// Controls for the fixed-point iteration. Times are physical; they are
/// mapped through the problem's scaling before the solver sees them.
#[derive(Debug, Clone, Copy)]
pub struct IterationConfig {
    /// Physical-time step of the inner solver.
    pub dt: f64,
    /// Physical-time horizon; `None` uses the T0 estimate.
    pub horizon: Option<f64>,
    /// Relative sup-norm tolerance on successive iterates.
    pub tol: f64,
    pub max_iter: usize,
    /// Constant C1 in the T0 estimate.
    pub c1: f64,
    pub dealias: bool,
    pub store_stride: usize,
    /// Number of interior times probed by the momentum-residual check.
    pub residual_probes: usize,
    /// Recover the pressure at every stored snapshot of the final iterate.
    pub with_pressure: bool,
}

impl IterationConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            horizon: None,
            tol: 1e-8,
            max_iter: 50,
            c1: 1.0,
            dealias: true,
            store_stride: 1,
            residual_probes: 10,
            with_pressure: false,
        }
    }
}

/// One row of the iteration log.
#[derive(Debug, Clone, Copy)]
pub struct IterationRow {
    pub n: usize,
    /// sup over stored times of ||u^(n) - u^(n-1)||_inf.
    pub delta_n: f64,
    pub sup_u: f64,
    pub sup_w: f64,
    /// Leray-projected momentum residual of iterate n.
    pub residual: f64,
}

/// Outcome of the fixed-point iteration, in the normalized frame; `map`
/// converts back to physical units.
#[derive(Debug)]
pub struct IterationReport {
    pub rows: Vec<IterationRow>,
    pub converged: bool,
    /// Horizon in normalized time.
    pub horizon: f64,
    pub map: ScalingMap,
    /// Final iterate: vorticity/velocity snapshots plus diagnostics.
    pub trajectory: VorticityTrajectory,
    /// Mean-zero pressure at each stored snapshot, when requested.
    pub pressure: Option<Vec<PeriodicVectorField>>,
    /// ||w0||_inf in the normalized frame (denominator of the diagnostic
    /// ratios).
    pub w0_sup: f64,
}

/// Writes the iteration log as CSV with header `n,delta_n,sup_u,sup_w,residual`.
pub fn write_iteration_csv(path: impl AsRef<Path>, rows: &[IterationRow]) -> Result<()> {
    let path = path.as_ref();
    let wrap = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(wrap)?;
    let mut out = std::io::BufWriter::new(file);
    (|| {
        writeln!(out, "n,delta_n,sup_u,sup_w,residual")?;
        for r in rows {
            writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e},{:.12e}",
                r.n, r.delta_n, r.sup_u, r.sup_w, r.residual
            )?;
        }
        out.flush()
    })()
    .map_err(wrap)
}

/// Runs the fixed-point iteration u^(0) = u0 (frozen in time), u^(n) =
/// V(u^(n-1)) until sup-norm stagnation below tol * sup|u| or `max_iter`.
/// Non-convergence is reported, not raised; solver aborts (CFL, blow-up,
/// mass drift) propagate as errors.
pub fn picard_iterate(p: &PhysicalProblem, cfg: &IterationConfig) -> Result<IterationReport> {
    let (u0, map) = nondimensionalize(p);
    let w0 = spectral::curl(&u0)?;
    let w0_sup = w0.sup_norm();

    let horizon = match cfg.horizon {
        Some(t) => {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::BadConfig(format!("horizon must be positive, got {t}")));
            }
            map.to_scaled_time(t)
        }
        None => {
            let t0 = estimate_t0(&w0, 0.5, 1.0, cfg.c1);
            if !t0.is_finite() {
                return Err(Error::BadConfig(
                    "zero initial vorticity has an unbounded horizon; set one explicitly".into(),
                ));
            }
            t0
        }
    };
    let dt = map.to_scaled_time(cfg.dt);
    let solve_cfg = SolveConfig {
        dt,
        t_end: horizon,
        dealias: cfg.dealias,
        store_stride: cfg.store_stride,
    };

    let mut prev = DriftHistory::frozen(u0)?;
    let mut rows = Vec::new();
    let mut converged = false;
    let mut trajectory = None;

    for n in 1..=cfg.max_iter {
        let traj =
            solver::solve_linearized_vorticity(&w0, &Drift::History(prev.clone()), &solve_cfg)?;
        let next = traj.velocity_history();

        // delta_n: previous iterate interpolated onto the new time grid.
        let mut scratch = PeriodicVectorField::zeros(next.grid(), 3);
        let mut delta = 0.0_f64;
        for (t, f) in next.times().iter().zip(next.fields()) {
            prev.interpolate_field(*t, &mut scratch);
            delta = delta.max(f.sup_norm_distance(&scratch));
        }

        let sup_u = next.sup_abs();
        let sup_w = traj
            .diagnostics()
            .iter()
            .fold(0.0_f64, |m, d| m.max(d.sup_w));
        let residual = momentum_residual(next, cfg.residual_probes, cfg.dealias)?;
        rows.push(IterationRow {
            n,
            delta_n: delta,
            sup_u,
            sup_w,
            residual,
        });

        let done = delta <= cfg.tol * sup_u;
        prev = traj.velocity_history().clone();
        trajectory = Some(traj);
        if done {
            converged = true;
            break;
        }
    }

    let trajectory = trajectory.expect("max_iter >= 1 guarantees one iterate");
    let pressure = if cfg.with_pressure {
        let mut ps = Vec::with_capacity(trajectory.velocity().len());
        for u in trajectory.velocity() {
            ps.push(recover_pressure(u)?);
        }
        Some(ps)
    } else {
        None
    };

    Ok(IterationReport {
        rows,
        converged,
        horizon,
        map,
        trajectory,
        pressure,
        w0_sup,
    })
}

/// Sup norm of the Leray-projected momentum residual Pi(du/dt + (u . grad) u
/// - (1/2) laplacian u) of a stored velocity history, evaluated at
/// `probes` interior times with a fourth-order central difference in time
/// and spectral calculus in space.
pub fn momentum_residual(u: &DriftHistory, probes: usize, dealias: bool) -> Result<f64> {
    let times = u.times();
    let fields = u.fields();
    let n_times = times.len();
    if n_times < 5 {
        // Too short for the five-point stencil; measure nothing.
        return Ok(0.0);
    }
    let dt = times[1] - times[0];
    let grid = u.grid();
    let len = grid.len();
    let lo = 2usize;
    let hi = n_times - 3;
    let count = probes.clamp(1, hi - lo + 1);
    let mut indices: Vec<usize> = (0..count)
        .map(|j| {
            if count == 1 {
                (lo + hi) / 2
            } else {
                lo + ((j as f64) * ((hi - lo) as f64) / ((count - 1) as f64)).round() as usize
            }
        })
        .collect();
    indices.dedup();

    let mut worst = 0.0_f64;
    let mut dudt = PeriodicVectorField::zeros(grid, 3);
    let two_pi = 2.0 * std::f64::consts::PI;
    for &i in &indices {
        // Fourth-order time derivative from the stored neighbors.
        {
            let a = fields[i - 2].data();
            let b = fields[i - 1].data();
            let c = fields[i + 1].data();
            let d = fields[i + 2].data();
            let out = dudt.data_mut();
            let inv = 1.0 / (12.0 * dt);
            for k in 0..out.len() {
                out[k] = (a[k] - 8.0 * b[k] + 8.0 * c[k] - d[k]) * inv;
            }
        }
        let ui = &fields[i];
        // Spectral data of u_i, with a dealiased copy for the products.
        let mut hat: Vec<Vec<Complex<f64>>> = Vec::with_capacity(3);
        for c in 0..3 {
            let mut buf = Vec::new();
            fft::forward_coeffs(grid, ui.component(c), &mut buf);
            hat.push(buf);
        }
        let mut u_t = PeriodicVectorField::zeros(grid, 3);
        let mut du = vec![vec![0.0f64; len]; 9];
        let mut buf = vec![Complex::new(0.0, 0.0); len];
        for c in 0..3 {
            buf.copy_from_slice(&hat[c]);
            if dealias {
                spectral::dealias_inplace(grid, &mut buf);
            }
            fft::inverse_to_real(grid, &buf, u_t.component_mut(c));
            let filtered = buf.clone();
            for ax in 0..3 {
                buf.copy_from_slice(&filtered);
                spectral::derivative_inplace(grid, &mut buf, ax);
                fft::inverse_to_real(grid, &buf, &mut du[3 * c + ax]);
            }
        }
        // F = du/dt + (u . grad) u - (1/2) laplacian u, assembled spectrally.
        let mut f_hat: Vec<Vec<Complex<f64>>> = Vec::with_capacity(3);
        let mut adv = vec![0.0f64; len];
        for c in 0..3 {
            let (v0, v1, v2) = (
                u_t.component(0),
                u_t.component(1),
                u_t.component(2),
            );
            let (d0, d1, d2) = (&du[3 * c], &du[3 * c + 1], &du[3 * c + 2]);
            for k in 0..len {
                adv[k] = v0[k] * d0[k] + v1[k] * d1[k] + v2[k] * d2[k];
            }
            let mut a_hat = Vec::new();
            fft::forward_coeffs(grid, &adv, &mut a_hat);
            if dealias {
                spectral::dealias_inplace(grid, &mut a_hat);
            }
            let mut fh = vec![Complex::new(0.0, 0.0); len];
            fft::forward_coeffs(grid, dudt.component(c), &mut fh);
            for (o, a) in fh.iter_mut().zip(&a_hat) {
                *o += a;
            }
            f_hat.push(fh);
        }
        // - (1/2) laplacian u and the Leray projection, per bin.
        let n = grid.n();
        for i1 in 0..n {
            let k1 = grid.wavenumber(i1) as f64;
            for i2 in 0..n {
                let k2 = grid.wavenumber(i2) as f64;
                for i3 in 0..n {
                    let k3 = grid.wavenumber(i3) as f64;
                    let idx = grid.idx(i1, i2, i3);
                    let ksq = k1 * k1 + k2 * k2 + k3 * k3;
                    let lam = 0.5 * two_pi * two_pi * ksq;
                    for c in 0..3 {
                        let uh = hat[c][idx];
                        f_hat[c][idx] += uh * lam;
                    }
                    if ksq > 0.0 {
                        let dot = f_hat[0][idx] * k1 + f_hat[1][idx] * k2 + f_hat[2][idx] * k3;
                        let s = dot / ksq;
                        f_hat[0][idx] -= s * k1;
                        f_hat[1][idx] -= s * k2;
                        f_hat[2][idx] -= s * k3;
                    }
                }
            }
        }
        let mut res = PeriodicVectorField::zeros(grid, 3);
        for c in 0..3 {
            fft::inverse_to_real(grid, &f_hat[c], res.component_mut(c));
        }
        worst = worst.max(res.sup_norm());
    }
    Ok(worst)
}

/// Mean-zero pressure of a velocity field: solves laplacian P =
/// -div((u . grad) u) spectrally.
pub fn recover_pressure(u: &PeriodicVectorField) -> Result<PeriodicVectorField> {
    if u.components() != 3 {
        return Err(Error::WrongComponents {
            expected: 3,
            got: u.components(),
        });
    }
    let grid = u.grid();
    let adv = advection(u, true)?;
    let mut div_hat = vec![Complex::new(0.0, 0.0); grid.len()];
    let mut buf = Vec::new();
    for c in 0..3 {
        fft::forward_coeffs(grid, adv.component(c), &mut buf);
        spectral::derivative_inplace(grid, &mut buf, c);
        for (a, b) in div_hat.iter_mut().zip(&buf) {
            *a += b;
        }
    }
    // laplacian P = -div a  =>  P^ = div^ / |2 pi k|^2, mean zero.
    let n = grid.n();
    let two_pi = 2.0 * std::f64::consts::PI;
    for i1 in 0..n {
        let k1 = grid.wavenumber(i1) as f64 * two_pi;
        for i2 in 0..n {
            let k2 = grid.wavenumber(i2) as f64 * two_pi;
            for i3 in 0..n {
                let k3 = grid.wavenumber(i3) as f64 * two_pi;
                let idx = grid.idx(i1, i2, i3);
                let ksq = k1 * k1 + k2 * k2 + k3 * k3;
                div_hat[idx] = if ksq == 0.0 {
                    Complex::new(0.0, 0.0)
                } else {
                    div_hat[idx] / ksq
                };
            }
        }
    }
    let mut out = PeriodicVectorField::zeros(grid, 1);
    fft::inverse_to_real(grid, &div_hat, out.component_mut(0));
    Ok(out)
}

/// The advection term (u . grad) u with both factors dealiased.
pub fn advection(u: &PeriodicVectorField, dealias: bool) -> Result<PeriodicVectorField> {
    if u.components() != 3 {
        return Err(Error::WrongComponents {
            expected: 3,
            got: u.components(),
        });
    }
    let grid = u.grid();
    let len = grid.len();
    let mut u_t = PeriodicVectorField::zeros(grid, 3);
    let mut du = vec![vec![0.0f64; len]; 9];
    let mut hat = Vec::new();
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for c in 0..3 {
        fft::forward_coeffs(grid, u.component(c), &mut hat);
        if dealias {
            spectral::dealias_inplace(grid, &mut hat);
        }
        fft::inverse_to_real(grid, &hat, u_t.component_mut(c));
        for ax in 0..3 {
            buf.copy_from_slice(&hat);
            spectral::derivative_inplace(grid, &mut buf, ax);
            fft::inverse_to_real(grid, &buf, &mut du[3 * c + ax]);
        }
    }
    let mut out = PeriodicVectorField::zeros(grid, 3);
    for c in 0..3 {
        let (v0, v1, v2) = (u_t.component(0), u_t.component(1), u_t.component(2));
        let (d0, d1, d2) = (&du[3 * c], &du[3 * c + 1], &du[3 * c + 2]);
        let o = out.component_mut(c);
        for k in 0..len {
            o[k] = v0[k] * d0[k] + v1[k] * d1[k] + v2[k] * d2[k];
        }
    }
    if dealias {
        for c in 0..3 {
            fft::forward_coeffs(grid, out.component(c), &mut hat);
            spectral::dealias_inplace(grid, &mut hat);
            fft::inverse_to_real(grid, &hat, out.component_mut(c));
        }
    }
    Ok(out)
}

/// One row of the a priori diagnostic table: the four sup quantities of the
/// main velocity/vorticity estimates, divided by ||w0||_inf.
#[derive(Debug, Clone, Copy)]
pub struct DiagnosticRow {
    pub t: f64,
    pub sup_u_ratio: f64,
    pub sqrt_t_grad_u_ratio: f64,
    pub sup_w_ratio: f64,
    pub sqrt_t_grad_w_ratio: f64,
}

/// Summary ratios over the whole trajectory (the measured stand-ins for the
/// universal constants of the main theorem).
#[derive(Debug, Clone)]
pub struct TheoremDiagnostics {
    pub rows: Vec<DiagnosticRow>,
    pub sup_u_ratio: f64,
    /// Parabolic norm sup_t sqrt(t) ||grad u||_inf over ||w0||_inf.
    pub grad_u_ratio: f64,
    pub sup_w_ratio: f64,
    pub grad_w_ratio: f64,
}

/// Computes the diagnostic table from a finished report; all quantities are
/// in the normalized frame. Zero initial vorticity yields all-zero ratios.
pub fn theorem1_diagnostics(report: &IterationReport) -> Result<TheoremDiagnostics> {
    let traj = &report.trajectory;
    let denom = if report.w0_sup == 0.0 {
        f64::INFINITY
    } else {
        report.w0_sup
    };
    let mut rows = Vec::with_capacity(traj.snapshot_times().len());
    let mut sup_u = 0.0_f64;
    let mut grad_u = 0.0_f64;
    let mut sup_w = 0.0_f64;
    let mut grad_w = 0.0_f64;
    for ((t, u), w) in traj
        .snapshot_times()
        .iter()
        .zip(traj.velocity())
        .zip(traj.vorticity())
    {
        let sqrt_t = t.sqrt();
        let row = DiagnosticRow {
            t: *t,
            sup_u_ratio: u.sup_norm() / denom,
            sqrt_t_grad_u_ratio: sqrt_t * spectral::total_derivative(u)?.sup_hs_norm() / denom,
            sup_w_ratio: w.sup_norm() / denom,
            sqrt_t_grad_w_ratio: sqrt_t * spectral::total_derivative(w)?.sup_hs_norm() / denom,
        };
        sup_u = sup_u.max(row.sup_u_ratio);
        grad_u = grad_u.max(row.sqrt_t_grad_u_ratio);
        sup_w = sup_w.max(row.sup_w_ratio);
        grad_w = grad_w.max(row.sqrt_t_grad_w_ratio);
        rows.push(row);
    }
    Ok(TheoremDiagnostics {
        rows,
        sup_u_ratio: sup_u,
        grad_u_ratio: grad_u,
        sup_w_ratio: sup_w,
        grad_w_ratio: grad_w,
    })
}

/// Writes the diagnostic table as CSV with header
/// `t,sup_u_ratio,sqrt_t_grad_u_ratio,sup_w_ratio,sqrt_t_grad_w_ratio`.
pub fn write_diagnostics_table_csv(
    path: impl AsRef<Path>,
    diag: &TheoremDiagnostics,
) -> Result<()> {
    let path = path.as_ref();
    let wrap = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(wrap)?;
    let mut out = std::io::BufWriter::new(file);
    (|| {
        writeln!(
            out,
            "t,sup_u_ratio,sqrt_t_grad_u_ratio,sup_w_ratio,sqrt_t_grad_w_ratio"
        )?;
        for r in &diag.rows {
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                r.t, r.sup_u_ratio, r.sqrt_t_grad_u_ratio, r.sup_w_ratio, r.sqrt_t_grad_w_ratio
            )?;
        }
        out.flush()
    })()
    .map_err(wrap)
}
