//! Matrix-valued functionals along sampled paths: the deformation matrix Q
//! solving dQ/ds = -Q A(X_s, s) backward from Q(t, t) = I, its time-reversed
//! counterpart Z solving dZ/dr = -J(Y_r, .) Z forward from Z(0) = I, and the
//! exponential-in-the-gradient bounds both are expected to satisfy.

use crate::drift::DriftGradients;
use crate::error::{Error, Result};
use crate::gaussian;
use crate::grid::GridSpec;
use crate::stochastic::PathBundle;

pub type Mat3 = [[f64; 3]; 3];

pub const MAT3_ID: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[inline]
pub(crate) fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

#[inline]
pub(crate) fn hs_norm_sq(m: &Mat3) -> f64 {
    m.iter().flatten().map(|v| v * v).sum()
}

/// exp(M) by scaling and squaring with a Taylor tail; ample for the mild
/// 3x3 generators that arise here.
pub fn matrix_exponential(m: &Mat3) -> Mat3 {
    let norm = hs_norm_sq(m).sqrt();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5_f64.powi(squarings as i32);
    let ms: Mat3 = {
        let mut s = *m;
        for row in &mut s {
            for v in row {
                *v *= scale;
            }
        }
        s
    };
    let mut result = MAT3_ID;
    let mut term = MAT3_ID;
    for k in 1..=16 {
        term = mat_mul(&term, &ms);
        let inv = 1.0 / k as f64;
        for i in 0..3 {
            for j in 0..3 {
                term[i][j] *= inv;
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result);
    }
    result
}

/// Integrates dQ/ds = -Q A(X_s, s) backward along one path from Q = I at the
/// final node, by the same trapezoidal predictor-corrector the field solver
/// uses. `times[i]` is the time of `positions[i]`; both run forward.
pub fn q_along_path<A>(times: &[f64], positions: &[[f64; 3]], a: &A) -> Mat3
where
    A: Fn([f64; 3], f64) -> Mat3,
{
    debug_assert_eq!(times.len(), positions.len());
    let n = times.len();
    let mut q = MAT3_ID;
    let mut a_hi = a(positions[n - 1], times[n - 1]);
    for i in (0..n - 1).rev() {
        let dt = times[i + 1] - times[i];
        let a_lo = a(positions[i], times[i]);
        // Predictor: Euler back from the right node, then average slopes.
        let qa_hi = mat_mul(&q, &a_hi);
        let mut qp = q;
        for r in 0..3 {
            for c in 0..3 {
                qp[r][c] += dt * qa_hi[r][c];
            }
        }
        let qp_a_lo = mat_mul(&qp, &a_lo);
        for r in 0..3 {
            for c in 0..3 {
                q[r][c] += 0.5 * dt * (qa_hi[r][c] + qp_a_lo[r][c]);
            }
        }
        a_hi = a_lo;
    }
    q
}

/// Q(tau, t) for every path in the bundle, with A read at wrapped positions.
pub fn integrate_q<A>(bundle: &PathBundle, a: &A) -> Result<Vec<Mat3>>
where
    A: Fn([f64; 3], f64) -> Mat3 + Sync,
{
    let times = bundle.times();
    let check = |m: &Mat3, p: usize, i: usize| -> Result<()> {
        if m.iter().flatten().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteDrift {
                path: p as u64,
                step: i,
            })
        }
    };
    let mut out = Vec::with_capacity(bundle.n_paths());
    for p in 0..bundle.n_paths() {
        let pos = bundle.positions(p);
        for (i, x) in pos.iter().enumerate() {
            check(&a(*x, times[i]), p, i)?;
        }
        out.push(q_along_path(times, &pos, a));
    }
    Ok(out)
}

/// Z(r) at every node of one reversed path: dZ/dr = -J(Y_r, t_total - r) Z
/// forward from Z(0) = I, trapezoidal predictor-corrector. The bundle's
/// clock is the reversed time r, so `t_total - r` is the drift's own clock.
fn z_stages<J>(bundle: &PathBundle, path: usize, j: &J, t_total: f64) -> Vec<Mat3>
where
    J: Fn([f64; 3], f64) -> Mat3,
{
    let times = bundle.times();
    let pos = bundle.positions(path);
    let n = times.len();
    let mut stages = Vec::with_capacity(n);
    let mut z = MAT3_ID;
    stages.push(z);
    let mut j_lo = j(pos[0], t_total - times[0]);
    for i in 0..n - 1 {
        let dt = times[i + 1] - times[i];
        let j_hi = j(pos[i + 1], t_total - times[i + 1]);
        let jz_lo = mat_mul(&j_lo, &z);
        let mut zp = z;
        for r in 0..3 {
            for c in 0..3 {
                zp[r][c] -= dt * jz_lo[r][c];
            }
        }
        let j_zp = mat_mul(&j_hi, &zp);
        for r in 0..3 {
            for c in 0..3 {
                z[r][c] -= 0.5 * dt * (jz_lo[r][c] + j_zp[r][c]);
            }
        }
        stages.push(z);
        j_lo = j_hi;
    }
    stages
}

/// Z at the final node for every path in the bundle.
pub fn integrate_z<J>(bundle: &PathBundle, j: &J, t_total: f64) -> Result<Vec<Mat3>>
where
    J: Fn([f64; 3], f64) -> Mat3 + Sync,
{
    let times = bundle.times();
    let mut out = Vec::with_capacity(bundle.n_paths());
    for p in 0..bundle.n_paths() {
        let pos = bundle.positions(p);
        for (i, x) in pos.iter().enumerate() {
            let m = j(*x, t_total - times[i]);
            if !m.iter().flatten().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteDrift {
                    path: p as u64,
                    step: i,
                });
            }
        }
        out.push(*z_stages(bundle, p, j, t_total).last().unwrap());
    }
    Ok(out)
}

/// Outcome of testing |Q|_HS^2 <= 9 exp(4 sqrt(t) |grad b|) over a sample.
#[derive(Debug, Clone, Copy)]
pub struct QBoundCheck {
    /// The theoretical right-hand side.
    pub bound: f64,
    /// Largest squared Hilbert-Schmidt norm observed.
    pub max_sq_norm: f64,
    /// Paths exceeding the bound.
    pub violations: usize,
    /// Smallest constant that would have sufficed in place of 9.
    pub tightest_prefactor: f64,
}

pub fn check_q_bound(qs: &[Mat3], span: f64, grad_norm: f64) -> QBoundCheck {
    let envelope = (4.0 * span.sqrt() * grad_norm).exp();
    let bound = 9.0 * envelope;
    let mut max_sq = 0.0_f64;
    let mut violations = 0usize;
    for q in qs {
        let s = hs_norm_sq(q);
        max_sq = max_sq.max(s);
        if s > bound {
            violations += 1;
        }
    }
    QBoundCheck {
        bound,
        max_sq_norm: max_sq,
        violations,
        tightest_prefactor: max_sq / envelope,
    }
}

/// Outcome of testing |Z(r)|_HS <= C exp(2 (sqrt(T) - sqrt(T - r)) |grad b|)
/// at every node of every path, for C = 3 (the dimension) and C = sqrt(3)
/// (the Hilbert-Schmidt norm of the identity).
#[derive(Debug, Clone, Copy)]
pub struct ZBoundCheck {
    pub holds_with_d: bool,
    pub holds_with_sqrt_d: bool,
    /// max over nodes of |Z| / exp-envelope; compare against the C choices.
    pub max_ratio: f64,
}

pub fn check_z_bound<J>(
    bundle: &PathBundle,
    j: &J,
    t_total: f64,
    grad_norm: f64,
) -> Result<ZBoundCheck>
where
    J: Fn([f64; 3], f64) -> Mat3 + Sync,
{
    let times = bundle.times();
    let sqrt_t = t_total.sqrt();
    let mut max_ratio = 0.0_f64;
    for p in 0..bundle.n_paths() {
        let stages = z_stages(bundle, p, j, t_total);
        for (i, z) in stages.iter().enumerate() {
            let r = times[i] - times[0];
            let envelope = (2.0 * (sqrt_t - (t_total - r).max(0.0).sqrt()) * grad_norm).exp();
            max_ratio = max_ratio.max(hs_norm_sq(z).sqrt() / envelope);
        }
    }
    Ok(ZBoundCheck {
        holds_with_d: max_ratio <= 3.0,
        holds_with_sqrt_d: max_ratio <= 3.0_f64.sqrt(),
        max_ratio,
    })
}

/// sup over [t0, t1] of sqrt(s - t0) sup_x |grad b(x, s)|_HS, scanning the
/// gradient on the grid at `n_times` equally spaced instants.
pub fn parabolic_gradient_norm(
    grads: &DriftGradients<'_>,
    grid: GridSpec,
    t0: f64,
    t1: f64,
    n_times: usize,
) -> f64 {
    let times: Vec<f64> = (0..n_times.max(2))
        .map(|i| t0 + (t1 - t0) * i as f64 / (n_times.max(2) - 1) as f64)
        .collect();
    let n = grid.n();
    let sups: Vec<f64> = times
        .iter()
        .map(|&s| {
            let mut sup: f64 = 0.0;
            for i1 in 0..n {
                for i2 in 0..n {
                    for i3 in 0..n {
                        let m = grads.at(grid.point(i1, i2, i3), s);
                        sup = sup.max(hs_norm_sq(&m).sqrt());
                    }
                }
            }
            sup
        })
        .collect();
    gaussian::parabolic_norm_from_sups(t0, &times, &sups)
        .expect("internally built time grid is sorted and starts at t0")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::Drift;
    use crate::flows;
    use crate::stochastic::sample_paths;

    fn bundle(b: &Drift, dt: f64, n_paths: usize, span: f64, seed: u64) -> PathBundle {
        let cfg = SdeConfig::new(dt, n_paths, seed).unwrap();
        sample_paths([0.4, 0.5, 0.6], 0.0, span, b, &cfg).unwrap()
    }
    use crate::stochastic::SdeConfig;

    #[test]
    fn exponential_matches_closed_forms() {
        // Rotation generator: exp maps to cosine/sine entries.
        let th = 0.7;
        let rot = [[0.0, -th, 0.0], [th, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let e = matrix_exponential(&rot);
        assert!((e[0][0] - th.cos()).abs() < 1e-14);
        assert!((e[0][1] + th.sin()).abs() < 1e-14);
        assert!((e[1][0] - th.sin()).abs() < 1e-14);
        assert!((e[2][2] - 1.0).abs() < 1e-14);

        // Diagonal exponentiates entrywise; nilpotent truncates exactly.
        let d = [[0.3, 0.0, 0.0], [0.0, -1.2, 0.0], [0.0, 0.0, 2.0]];
        let ed = matrix_exponential(&d);
        for i in 0..3 {
            assert!((ed[i][i] - d[i][i].exp()).abs() < 1e-13);
        }
        let nil = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]];
        let en = matrix_exponential(&nil);
        assert!((en[0][1] - 1.0).abs() < 1e-15);
        assert!((en[0][2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_field_leaves_both_matrices_at_identity() {
        let b = bundle(&Drift::Zero, 0.01, 3, 0.1, 5);
        let zero = |_x: [f64; 3], _t: f64| [[0.0; 3]; 3];
        for q in integrate_q(&b, &zero).unwrap() {
            assert_eq!(q, MAT3_ID);
        }
        for z in integrate_z(&b, &zero, 0.1).unwrap() {
            assert_eq!(z, MAT3_ID);
        }
    }

    #[test]
    fn constant_generators_integrate_to_matrix_exponentials() {
        // With A constant, Q(s) = exp(A (t - s)), so Q at the initial node
        // is exp(A t); Z with constant J is exp(-J r) at the final node.
        let a_mat = [[0.1, 0.4, 0.0], [-0.3, 0.2, 0.1], [0.0, 0.2, -0.3]];
        let span = 0.5;
        let b = bundle(&Drift::Zero, 1e-3, 2, span, 9);
        let a = |_x: [f64; 3], _t: f64| a_mat;

        let mut scaled = a_mat;
        for row in &mut scaled {
            for v in row {
                *v *= span;
            }
        }
        let expect_q = matrix_exponential(&scaled);
        for q in integrate_q(&b, &a).unwrap() {
            for i in 0..3 {
                for j in 0..3 {
                    assert!((q[i][j] - expect_q[i][j]).abs() < 1e-6);
                }
            }
        }

        let mut neg = scaled;
        for row in &mut neg {
            for v in row {
                *v = -*v;
            }
        }
        let expect_z = matrix_exponential(&neg);
        for z in integrate_z(&b, &a, span).unwrap() {
            for i in 0..3 {
                for j in 0..3 {
                    assert!((z[i][j] - expect_z[i][j]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn shear_flow_respects_the_deformation_bound() {
        let amp = 0.8;
        let span = 0.3;
        let drift = Drift::Shear { amplitude: amp };
        let b = bundle(&drift, 2e-3, 400, span, 31);
        let a = |x: [f64; 3], _t: f64| flows::shear_jacobian_at(x, amp);
        let qs = integrate_q(&b, &a).unwrap();
        // Time-independent shear: parabolic norm is sqrt(span) sup |grad b|.
        let grad_norm = span.sqrt() * flows::shear_jacobian_at([0.0, 0.0, 0.0], amp)[0][1].abs();
        let check = check_q_bound(&qs, span, grad_norm);
        assert_eq!(check.violations, 0);
        assert!(check.tightest_prefactor <= 9.0);
        assert!(check.max_sq_norm >= 3.0 - 1e-12);
    }

    #[test]
    fn shear_flow_respects_the_reversed_bound_with_dimension_constant() {
        let amp = 0.8;
        let span = 0.3;
        let drift = Drift::Shear { amplitude: amp };
        let b = bundle(&drift, 2e-3, 400, span, 77);
        let jac = |x: [f64; 3], _t: f64| flows::shear_jacobian_at(x, amp);
        let grad_norm = span.sqrt() * 2.0 * std::f64::consts::PI * amp;
        let check = check_z_bound(&b, &jac, span, grad_norm).unwrap();
        assert!(check.holds_with_d, "max ratio {}", check.max_ratio);
    }

    #[test]
    fn parabolic_norm_of_shear_is_exact() {
        let amp = 0.6;
        let drift = Drift::Shear { amplitude: amp };
        let grads = DriftGradients::new(&drift).unwrap();
        let grid = GridSpec::new(16).unwrap();
        let got = parabolic_gradient_norm(&grads, grid, 0.0, 0.4, 9);
        // sup_x |grad b|_HS is attained on the grid (cos = 1 at x2 = 0).
        let expect = 0.4_f64.sqrt() * 2.0 * std::f64::consts::PI * amp;
        assert!((got - expect).abs() < 1e-12 * expect);
    }
}
