//! The bridge moment integral and its two evaluation routes.
//!
//! For a Brownian motion started at x at time tau, X_s ~ Normal(x, (s-tau) I_d)
//! and the quantity of interest is
//!
//! ```text
//! I = E[ ( (|y - X_s| / (t - s))^alpha G_{t-s}(y - X_s) )^beta ]
//! ```
//!
//! Raising the heat kernel to the beta power and completing the square leaves
//! a single Gaussian expectation, evaluated in closed form here; `i_mc`
//! estimates the same quantity by direct sampling so the algebra is never
//! trusted on its own.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bounds::hermite::radial_moment_exact;
use crate::error::{Error, Result};
use crate::gaussian::gaussian_value;
use crate::stats::RunningStats;
use crate::stochastic::block_reduce;

/// Parameters of the bridge moment integral.
///
/// The rescaled gaps t1 = (t - s) / beta and t2 = s - tau are the natural
/// variables of the closed form: the beta-th power of G_{t-s} is, up to a
/// constant, the kernel G_{t1}.
#[derive(Debug, Clone, Copy)]
pub struct IntegralParams {
    alpha: f64,
    beta: f64,
    tau: f64,
    s: f64,
    t: f64,
    x: [f64; 3],
    y: [f64; 3],
    d: usize,
}

impl IntegralParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        tau: f64,
        s: f64,
        t: f64,
        x: [f64; 3],
        y: [f64; 3],
        d: usize,
    ) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::BadConfig(format!("dimension must be 1..=3, got {d}")));
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::BadConfig(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::BadConfig(format!("beta must be finite and > 0, got {beta}")));
        }
        if !(tau.is_finite() && s.is_finite() && t.is_finite()) || !(t > s && s > tau) {
            return Err(Error::BadConfig(format!(
                "times must be finite with t > s > tau, got tau={tau} s={s} t={t}"
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::BadConfig("endpoints must be finite".into()));
        }
        Ok(Self { alpha, beta, tau, s, t, x, y, d })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Rescaled forward gap (t - s) / beta.
    pub fn t1(&self) -> f64 {
        (self.t - self.s) / self.beta
    }

    /// Elapsed diffusion time s - tau.
    pub fn t2(&self) -> f64 {
        self.s - self.tau
    }

    /// Euclidean distance between x and y in the first d coordinates.
    pub fn dist(&self) -> f64 {
        let mut r2 = 0.0;
        for j in 0..self.d {
            let dj = self.x[j] - self.y[j];
            r2 += dj * dj;
        }
        r2.sqrt()
    }
}

/// Closed form of the moment integral:
///
/// ```text
/// I = C1 t1^{-(d(beta-1)/2 + alpha beta)} G_{t1+t2}(y - x) E|mu e1 + sigma Z|^{alpha beta}
/// C1 = (2 pi)^{-d(beta-1)/2} beta^{-(d/2 + alpha) beta}
/// sigma^2 = t1 t2 / (t1 + t2),  mu = t1 |x - y| / (t1 + t2)
/// ```
///
/// The residual moment uses the exact noncentral chi-square series when
/// alpha*beta is an even integer and Gauss-Hermite quadrature otherwise.
pub fn i_closed_form(p: &IntegralParams) -> f64 {
    i_closed_form_raw(p.alpha, p.beta, p.d, p.t1(), p.t2(), p.dist())
}

/// Core of the closed form in the rescaled variables; t2 = 0 is legal here
/// (the moment degenerates to dist^{alpha beta}), which the time-integrated
/// bound needs at its s = tau endpoint.
pub(crate) fn i_closed_form_raw(
    alpha: f64,
    beta: f64,
    d: usize,
    t1: f64,
    t2: f64,
    dist: f64,
) -> f64 {
    let df = d as f64;
    let c1 = (2.0 * PI).powf(-df * (beta - 1.0) / 2.0) * beta.powf(-(df / 2.0 + alpha) * beta);
    let total = t1 + t2;
    let sigma = (t1 * t2 / total).sqrt();
    let mu = t1 * dist / total;
    let power = alpha * beta;
    // The Poisson-mixture moment series is exact for every real power >= 0,
    // so the closed form always uses it; the Gauss-Hermite quadrature is the
    // independent route that cross-checks the series in the unit tests.
    let moment = radial_moment_exact(d, sigma, mu, power);
    c1 * t1.powf(-(df * (beta - 1.0) / 2.0 + power)) * gaussian_value(total, d, dist * dist) * moment
}

/// A Monte Carlo estimate of the moment integral.
#[derive(Debug, Clone, Copy)]
pub struct IntegralEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
}

/// Estimates the integral by sampling X_s ~ Normal(x, t2 I_d) directly.
///
/// Each sample owns the RNG stream seed ^ index, and samples are reduced in
/// fixed block order, so the estimate is independent of thread count.
pub fn i_mc(p: &IntegralParams, n_samples: u64, seed: u64) -> Result<IntegralEstimate> {
    let gap = p.t - p.s;
    let spread = p.t2().sqrt();
    let stats = block_reduce::<RunningStats, _, _>(
        n_samples as usize,
        |acc, i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
            let mut r2 = 0.0;
            for j in 0..p.d {
                let z: f64 = StandardNormal.sample(&mut rng);
                let rj = p.x[j] + spread * z - p.y[j];
                r2 += rj * rj;
            }
            let g = gaussian_value(gap, p.d, r2);
            let sample = if p.alpha == 0.0 {
                g.powf(p.beta)
            } else {
                ((r2.sqrt() / gap).powf(p.alpha) * g).powf(p.beta)
            };
            acc.push(sample);
            Ok(())
        },
        |into, from| into.merge(&from),
    )?;
    Ok(IntegralEstimate {
        value: stats.mean(),
        std_error: stats.std_error(),
        n_samples,
        seed,
    })
}

/// The standard 12-point sweep: alpha in {0, 1, 2} crossed with
/// beta in {1, 1.5, 2, 3}, alternating the dimension over {3, 1}, at fixed
/// generic times and endpoints.
pub fn standard_sweep() -> Vec<IntegralParams> {
    let x = [0.15, 0.3, 0.55];
    let y = [0.4, 0.62, 0.2];
    let mut out = Vec::with_capacity(12);
    let mut use_d3 = true;
    for &alpha in &[0.0, 1.0, 2.0] {
        for &beta in &[1.0, 1.5, 2.0, 3.0] {
            let d = if use_d3 { 3 } else { 1 };
            use_d3 = !use_d3;
            out.push(
                IntegralParams::new(alpha, beta, 0.1, 0.35, 0.6, x, y, d)
                    .expect("sweep parameters satisfy the invariants"),
            );
        }
    }
    out
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`, with the usual
/// 15x Richardson acceptance test and a depth cap as the safety net.
pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_split(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_split<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_split(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_split(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// The weakly singular integral ∫₀¹ (1-s)^a s^{-p} ds for a >= 0, 0 <= p < 1
/// (equal to the Beta function B(a+1, 1-p)).
///
/// Split at 1/2; the substitutions s = v^{1/(1-p)} on the left and
/// 1 - s = u^{1/(1+a)} on the right absorb both endpoint singularities, so
/// plain adaptive Simpson sees smooth integrands.
pub(crate) fn singular_beta_integral(a: f64, p: f64) -> f64 {
    assert!(a >= 0.0 && (0.0..1.0).contains(&p), "need a >= 0 and 0 <= p < 1");
    let left_exp = 1.0 / (1.0 - p);
    let left_cut = 0.5_f64.powf(1.0 - p);
    let left = adaptive_simpson(
        &|v: f64| (1.0 - v.powf(left_exp)).powf(a),
        0.0,
        left_cut,
        1e-13,
    ) / (1.0 - p);
    let right_exp = 1.0 / (1.0 + a);
    let right_cut = 0.5_f64.powf(1.0 + a);
    let right = adaptive_simpson(
        &|u: f64| (1.0 - u.powf(right_exp)).powf(-p),
        0.0,
        right_cut,
        1e-13,
    ) / (1.0 + a);
    left + right
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::beta::beta;

    const X: [f64; 3] = [0.15, 0.3, 0.55];
    const Y: [f64; 3] = [0.4, 0.62, 0.2];

    #[test]
    fn chapman_kolmogorov_collapse() {
        // alpha = 0, beta = 1: averaging G_{t-s}(y - X_s) over the Brownian
        // law is exactly G_{t-tau}(y - x).
        let p = IntegralParams::new(0.0, 1.0, 0.1, 0.35, 0.6, X, Y, 3).unwrap();
        let closed = i_closed_form(&p);
        let target = gaussian_value(0.5, 3, p.dist() * p.dist());
        assert!((closed / target - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pinned_second_moment_matches_the_gaussian_product_formula() {
        // x = y, alpha = 2, beta = 1, d = 1: the integrand is
        // (z / (t-s))^2 G_{t-s}(z) against z ~ Normal(0, t2). The Gaussian
        // product formula turns the integral into the second moment of a
        // centered normal with variance t1 t2 / (t1 + t2), so
        // I = G_{t1+t2}(0) * t2 / (t1 (t1 + t2)).
        let p = IntegralParams::new(2.0, 1.0, 0.1, 0.35, 0.6, X, X, 1).unwrap();
        let t1 = p.t1();
        let t2 = p.t2();
        let target = gaussian_value(t1 + t2, 1, 0.0) * t2 / (t1 * (t1 + t2));
        let closed = i_closed_form(&p);
        assert!((closed / target - 1.0).abs() < 1e-13);

        let mc = i_mc(&p, 200_000, 11).unwrap();
        let tol = (3.0 * mc.std_error).max(0.005 * target);
        assert!(
            (mc.value - target).abs() < tol,
            "mc {} vs {} (tol {})",
            mc.value,
            target,
            tol
        );
    }

    #[test]
    fn closed_form_matches_sampling_on_generic_parameters() {
        let p = IntegralParams::new(1.0, 2.0, 0.1, 0.35, 0.6, X, Y, 3).unwrap();
        let closed = i_closed_form(&p);
        let mc = i_mc(&p, 200_000, 7).unwrap();
        let tol = (3.0 * mc.std_error).max(0.01 * closed.abs());
        assert!(
            (mc.value - closed).abs() < tol,
            "mc {} vs closed {} (tol {})",
            mc.value,
            closed,
            tol
        );
    }

    #[test]
    fn closed_form_obeys_the_diffusive_scaling_exponent() {
        // (t, s, tau) -> lambda * and (x, y) -> sqrt(lambda) * multiplies the
        // integral by lambda^{-beta (d + alpha) / 2}.
        let lambda = 2.7_f64;
        for &(alpha, beta, d) in &[(1.0, 2.0, 3usize), (2.0, 1.5, 1), (1.0, 3.0, 3)] {
            let p = IntegralParams::new(alpha, beta, 0.1, 0.35, 0.6, X, Y, d).unwrap();
            let sq = lambda.sqrt();
            let xs = [X[0] * sq, X[1] * sq, X[2] * sq];
            let ys = [Y[0] * sq, Y[1] * sq, Y[2] * sq];
            let ps = IntegralParams::new(
                alpha,
                beta,
                0.1 * lambda,
                0.35 * lambda,
                0.6 * lambda,
                xs,
                ys,
                d,
            )
            .unwrap();
            let expected = i_closed_form(&p) * lambda.powf(-beta * (d as f64 + alpha) / 2.0);
            let scaled = i_closed_form(&ps);
            assert!(
                (scaled / expected - 1.0).abs() < 1e-10,
                "alpha={alpha} beta={beta} d={d}: {scaled} vs {expected}"
            );
        }
    }

    #[test]
    fn sweep_covers_both_dimensions_and_all_pairs() {
        let sweep = standard_sweep();
        assert_eq!(sweep.len(), 12);
        assert_eq!(sweep.iter().filter(|p| p.d() == 3).count(), 6);
        assert_eq!(sweep.iter().filter(|p| p.d() == 1).count(), 6);
        let mut pairs: Vec<(u32, u32)> = sweep
            .iter()
            .map(|p| ((p.alpha() * 10.0) as u32, (p.beta() * 10.0) as u32))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        assert_eq!(pairs.len(), 12);
    }

    #[test]
    fn estimates_are_bit_reproducible() {
        let p = IntegralParams::new(1.0, 2.0, 0.1, 0.35, 0.6, X, Y, 3).unwrap();
        let a = i_mc(&p, 50_000, 42).unwrap();
        let b = i_mc(&p, 50_000, 42).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        let c = i_mc(&p, 50_000, 43).unwrap();
        assert_ne!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(IntegralParams::new(-0.5, 1.0, 0.1, 0.35, 0.6, X, Y, 3).is_err());
        assert!(IntegralParams::new(1.0, 0.0, 0.1, 0.35, 0.6, X, Y, 3).is_err());
        assert!(IntegralParams::new(1.0, 1.0, 0.4, 0.35, 0.6, X, Y, 3).is_err());
        assert!(IntegralParams::new(1.0, 1.0, 0.1, 0.7, 0.6, X, Y, 3).is_err());
        assert!(IntegralParams::new(1.0, 1.0, 0.1, 0.35, 0.6, X, Y, 4).is_err());
    }

    #[test]
    fn singular_integral_matches_the_beta_function() {
        let cases = [
            (0.5, 0.75, beta(1.5, 0.25), 1e-10),
            (0.0, 0.6, 1.0 / 0.4, 1e-13),
            (1.0, 0.3, beta(2.0, 0.7), 1e-12),
        ];
        for &(a, p, target, tol) in &cases {
            let got = singular_beta_integral(a, p);
            assert!(
                (got / target - 1.0).abs() < tol,
                "a={a} p={p}: {got} vs {target}"
            );
        }
    }
}
