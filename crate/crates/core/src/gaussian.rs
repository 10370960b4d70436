//! Gaussian (heat) kernel utilities: the free-space density G_t, its lattice
//! periodization on the torus, and the parabolic sup-norm.

use crate::error::{Error, Result};
use crate::field::PeriodicVectorField;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Parameters of a Gaussian envelope: variance parameter `t` (time),
/// dimension `d`, and inflation factor `beta >= 1` (the envelope used by the
/// bounds is G at time beta * t).
#[derive(Debug, Clone, Copy)]
pub struct GaussianKernelParams {
    pub t: f64,
    pub d: usize,
    pub beta: f64,
}

impl GaussianKernelParams {
    pub fn new(t: f64, d: usize, beta: f64) -> Result<Self> {
        if t <= 0.0 {
            return Err(Error::NonPositiveTime(t));
        }
        assert!(beta >= 1.0, "envelope inflation must be >= 1, got {beta}");
        assert!(d >= 1, "dimension must be at least 1");
        Ok(Self { t, d, beta })
    }
}

/// Free-space heat kernel G_t(x) = (2 pi t)^{-d/2} exp(-|x|^2 / (2t)) for the
/// first `d` coordinates of `x`.
pub fn gaussian_kernel(p: GaussianKernelParams, x: &[f64]) -> f64 {
    debug_assert!(x.len() >= p.d);
    let r2: f64 = x[..p.d].iter().map(|v| v * v).sum();
    gaussian_value(p.t, p.d, r2)
}

/// G_t evaluated from the squared radius.
#[inline]
pub fn gaussian_value(t: f64, d: usize, r2: f64) -> f64 {
    (TWO_PI * t).powf(-(d as f64) / 2.0) * (-r2 / (2.0 * t)).exp()
}

/// 1-D heat kernel, the separable factor of the d-dimensional one.
#[inline]
pub fn gaussian_1d(t: f64, x: f64) -> f64 {
    (TWO_PI * t).sqrt().recip() * (-x * x / (2.0 * t)).exp()
}

/// Number of lattice images per axis so that the omitted Gaussian tail is
/// below 1e-12: images k with |k| <= K, K = ceil(1 + 6 sqrt(t)).
#[inline]
pub fn periodization_radius(t: f64) -> i64 {
    (1.0 + 6.0 * t.sqrt()).ceil() as i64
}

/// Periodized heat kernel on the unit torus,
/// h_t(x) = sum_{k in Z^d} G_t(x + k), truncated at |k_i| <= K per axis.
/// The sum factorizes over axes, so each axis is periodized independently.
pub fn periodized_gaussian(p: GaussianKernelParams, x: &[f64]) -> f64 {
    debug_assert!(x.len() >= p.d);
    let kmax = periodization_radius(p.t);
    let mut prod = 1.0;
    for &xi in &x[..p.d] {
        prod *= periodized_gaussian_1d(p.t, xi, kmax);
    }
    prod
}

/// One separable factor of the periodized kernel.
#[inline]
pub fn periodized_gaussian_1d(t: f64, x: f64, kmax: i64) -> f64 {
    let mut s = 0.0;
    for k in -kmax..=kmax {
        s += gaussian_1d(t, x + k as f64);
    }
    s
}

/// Parabolic sup-norm sup_{t, x} sqrt(t - tau) |f(x, t)| of a time series of
/// magnitude fields |f| sampled on [tau, T].
pub fn parabolic_norm(
    tau: f64,
    times: &[f64],
    magnitudes: &[PeriodicVectorField],
) -> Result<f64> {
    if times.is_empty() || times.len() != magnitudes.len() {
        return Err(Error::EmptySeries);
    }
    let mut best = 0.0_f64;
    for (&t, field) in times.iter().zip(magnitudes) {
        if t < tau {
            continue;
        }
        let weight = (t - tau).sqrt();
        best = best.max(weight * field.sup_abs());
    }
    Ok(best)
}

/// Parabolic sup-norm from precomputed per-time suprema sup_x |f(x, t)|.
pub fn parabolic_norm_from_sups(tau: f64, times: &[f64], sups: &[f64]) -> Result<f64> {
    if times.is_empty() || times.len() != sups.len() {
        return Err(Error::EmptySeries);
    }
    let mut best = 0.0_f64;
    for (&t, &s) in times.iter().zip(sups) {
        if t < tau {
            continue;
        }
        best = best.max((t - tau).sqrt() * s);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn standard_normal_density_at_origin() {
        let p = GaussianKernelParams::new(1.0, 1, 2.0).unwrap();
        let v = gaussian_kernel(p, &[0.0]);
        assert!((v - 1.0 / TWO_PI.sqrt()).abs() < 1e-12);
        assert!((v - 0.3989422804014327).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_time() {
        assert!(GaussianKernelParams::new(0.0, 3, 2.0).is_err());
        assert!(GaussianKernelParams::new(-1.0, 3, 2.0).is_err());
    }

    #[test]
    fn constant_series_norm_peaks_at_final_time() {
        let grid = GridSpec::new(4).unwrap();
        let c = PeriodicVectorField::from_fn(grid, |_| [2.0]);
        let times = [0.0, 0.05, 0.1];
        let fields = vec![c.clone(), c.clone(), c];
        let norm = parabolic_norm(0.0, &times, &fields).unwrap();
        assert!((norm - 2.0 * 0.1_f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn inverse_sqrt_series_has_unit_norm() {
        let times: Vec<f64> = (1..=20).map(|i| i as f64 * 0.005).collect();
        let sups: Vec<f64> = times.iter().map(|t| 1.0 / t.sqrt()).collect();
        let norm = parabolic_norm_from_sups(0.0, &times, &sups).unwrap();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_series_is_rejected() {
        assert!(parabolic_norm_from_sups(0.0, &[], &[]).is_err());
    }
}
