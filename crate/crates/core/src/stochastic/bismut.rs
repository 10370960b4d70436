//! Gradient of the log transition density by a Bismut-type formula: running
//! the time-reversed SDE
//!
//!   dY_r = dB_r - b(Y_r, tau + T - r) dr,   Y_0 = x,
//!
//! to r = T - eps with eps = T/2, alongside the variational flow
//! dZ/dr = -grad b . Z from Z(0) = I, the j-th component of the gradient is
//!
//!   d ln p_b(tau, xi, tau + T, x) / dx_j
//!     = (1 / (T - eps)) E[ R int_0^{T-eps} Z^k_j dB^k ],
//!
//! where R = p_b(tau, xi, tau + eps, Y_{T-eps}) / p_b(tau, xi, tau + T, x)
//! reweights paths by the density they land on. The source point xi enters
//! only through those two density inputs, which the caller supplies: a
//! pointwise evaluator for the half-time kernel and the full-time value at x.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::drift::{Drift, DriftGradients};
use crate::error::{Error, Result};
use crate::gaussian;
use crate::stats::VectorStats;
use crate::stochastic::matrices::{mat_mul, MAT3_ID};
use crate::stochastic::vorticity::VectorEstimate;
use crate::stochastic::{block_reduce, wrap3, SdeConfig};

/// Densities below this floor are clamped and the path counted in `flagged`.
const DENSITY_FLOOR: f64 = 1e-300;

/// The free-space heat kernel G_span(. - xi), the exact half-time density
/// for b = 0 on the covering space.
pub fn free_kernel_evaluator(xi: [f64; 3], span: f64) -> impl Fn([f64; 3]) -> f64 + Sync {
    move |y| {
        let r2 = (y[0] - xi[0]).powi(2) + (y[1] - xi[1]).powi(2) + (y[2] - xi[2]).powi(2);
        gaussian::gaussian_value(span, 3, r2)
    }
}

#[derive(Default)]
struct Acc {
    stats: VectorStats<3>,
    flagged: usize,
}

/// Estimates the gradient of ln p_b(tau, xi, tau + t_cap, x) in x.
///
/// `kernel_half` evaluates p_b(tau, xi, tau + t_cap/2, .) at unwrapped
/// points (a grid-backed evaluator should wrap internally), and
/// `kernel_full_at_x` is p_b(tau, xi, tau + t_cap, x).
pub fn bismut_gradient<K>(
    tau: f64,
    t_cap: f64,
    x: [f64; 3],
    b: &Drift,
    kernel_half: &K,
    kernel_full_at_x: f64,
    cfg: &SdeConfig,
) -> Result<VectorEstimate>
where
    K: Fn([f64; 3]) -> f64 + Sync,
{
    if !(t_cap > 0.0) || !t_cap.is_finite() {
        return Err(Error::BadConfig(format!(
            "gradient horizon must be positive and finite, got {t_cap}"
        )));
    }
    if !(kernel_full_at_x > 0.0) || !kernel_full_at_x.is_finite() {
        return Err(Error::BadConfig(format!(
            "full-time density at the evaluation point must be positive, got {kernel_full_at_x}"
        )));
    }
    let span = 0.5 * t_cap; // T - eps with eps = T/2
    let n_steps = cfg.n_steps(span)?;
    let dt = span / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let grads = DriftGradients::new(b)?;

    let acc = block_reduce::<Acc, _, _>(
        cfg.n_paths,
        |acc, p| {
            let mut rng = cfg.path_rng(p);
            let mut y = x;
            let mut z = MAT3_ID;
            let mut m = [0.0_f64; 3];
            let mut j_lo = grads.at(wrap3(y), tau + t_cap);
            for i in 0..n_steps {
                let r = i as f64 * dt;
                let clock = tau + t_cap - r;
                let v = b.velocity(wrap3(y), clock);
                if !v.iter().all(|c| c.is_finite()) {
                    return Err(Error::NonFiniteDrift {
                        path: p as u64,
                        step: i,
                    });
                }
                let mut db = [0.0; 3];
                for d in &mut db {
                    let n: f64 = rng.sample(StandardNormal);
                    *d = sqrt_dt * n;
                }
                // Left-point stochastic integral: Z before its update, same
                // increment that moves the path.
                for j in 0..3 {
                    m[j] += z[0][j] * db[0] + z[1][j] * db[1] + z[2][j] * db[2];
                }
                let mut y_next = y;
                for c in 0..3 {
                    y_next[c] += db[c] - v[c] * dt;
                }
                let j_hi = grads.at(wrap3(y_next), tau + t_cap - (r + dt));
                // Trapezoidal step of dZ/dr = -J Z.
                let jz_lo = mat_mul(&j_lo, &z);
                let mut zp = z;
                for a in 0..3 {
                    for c in 0..3 {
                        zp[a][c] -= dt * jz_lo[a][c];
                    }
                }
                let j_zp = mat_mul(&j_hi, &zp);
                for a in 0..3 {
                    for c in 0..3 {
                        z[a][c] -= 0.5 * dt * (jz_lo[a][c] + j_zp[a][c]);
                    }
                }
                y = y_next;
                j_lo = j_hi;
            }
            let mut ph = kernel_half(y);
            if !ph.is_finite() {
                return Err(Error::BadConfig(format!(
                    "kernel evaluator returned a non-finite density at {y:?}"
                )));
            }
            if ph < DENSITY_FLOOR {
                ph = DENSITY_FLOOR;
                acc.flagged += 1;
            }
            let r_weight = ph / kernel_full_at_x;
            let scale = r_weight / span;
            let sample = [m[0] * scale, m[1] * scale, m[2] * scale];
            acc.stats.push(sample);
            Ok(())
        },
        |out, blk| {
            out.stats.merge(&blk.stats);
            out.flagged += blk.flagged;
        },
    )?;

    Ok(VectorEstimate {
        value: acc.stats.mean(),
        std_error: acc.stats.std_error(),
        n_paths: cfg.n_paths,
        flagged: acc.flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const XI: [f64; 3] = [0.4, 0.5, 0.6];

    #[test]
    fn driftless_gradient_is_the_gaussian_score() {
        // For b = 0 the density is G_T(x - xi), whose log-gradient in x is
        // -(x - xi)/T; with exact Brownian increments the estimator carries
        // no time-discretization bias at all.
        let t_cap = 0.2;
        let x = [XI[0] + 0.1, XI[1], XI[2]];
        let cfg = SdeConfig::new(2.5e-3, 20_000, 314).unwrap();
        let half = free_kernel_evaluator(XI, 0.5 * t_cap);
        let full = gaussian::gaussian_value(t_cap, 3, 0.01);
        let est = bismut_gradient(0.0, t_cap, x, &Drift::Zero, &half, full, &cfg).unwrap();
        let target = [-0.1 / t_cap, 0.0, 0.0];
        assert_eq!(est.flagged, 0);
        for c in 0..3 {
            assert!(
                (est.value[c] - target[c]).abs() < 3.0 * est.std_error[c],
                "component {c}: {} vs {}, se {}",
                est.value[c],
                target[c],
                est.std_error[c]
            );
        }
    }

    #[test]
    fn gradient_at_the_source_vanishes_by_symmetry() {
        let t_cap = 0.2;
        let cfg = SdeConfig::new(2.5e-3, 20_000, 2718).unwrap();
        let half = free_kernel_evaluator(XI, 0.5 * t_cap);
        let full = gaussian::gaussian_value(t_cap, 3, 0.0);
        let est = bismut_gradient(0.0, t_cap, XI, &Drift::Zero, &half, full, &cfg).unwrap();
        assert_eq!(est.flagged, 0);
        for c in 0..3 {
            assert!(est.value[c].abs() < 3.0 * est.std_error[c]);
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let cfg = SdeConfig::new(0.01, 10, 1).unwrap();
        let half = free_kernel_evaluator(XI, 0.1);
        assert!(bismut_gradient(0.0, 0.0, XI, &Drift::Zero, &half, 1.0, &cfg).is_err());
        assert!(bismut_gradient(0.0, 0.2, XI, &Drift::Zero, &half, 0.0, &cfg).is_err());
        assert!(bismut_gradient(0.0, 0.2, XI, &Drift::Zero, &half, f64::NAN, &cfg).is_err());
    }
}
