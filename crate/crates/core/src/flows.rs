//! Reference flows used as drifts, initial conditions, and test fixtures.
//! All are smooth, periodic, mean-zero, and divergence-free.

use crate::field::PeriodicVectorField;
use crate::grid::GridSpec;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Taylor-Green velocity
/// u = A (sin 2pi x1 cos 2pi x2 cos 2pi x3,
///        -cos 2pi x1 sin 2pi x2 cos 2pi x3,
///        0).
pub fn taylor_green(grid: GridSpec, amplitude: f64) -> PeriodicVectorField {
    PeriodicVectorField::from_fn(grid, |x| taylor_green_at(x, amplitude))
}

/// Pointwise Taylor-Green velocity (analytic form used by path samplers).
#[inline]
pub fn taylor_green_at(x: [f64; 3], amplitude: f64) -> [f64; 3] {
    let (s1, c1) = (TWO_PI * x[0]).sin_cos();
    let (s2, c2) = (TWO_PI * x[1]).sin_cos();
    let c3 = (TWO_PI * x[2]).cos();
    [
        amplitude * s1 * c2 * c3,
        -amplitude * c1 * s2 * c3,
        0.0,
    ]
}

/// Curl of the Taylor-Green velocity, differentiated symbolically:
/// w = 2 pi A (-cos 2pi x1 sin 2pi x2 sin 2pi x3,
///             -sin 2pi x1 cos 2pi x2 sin 2pi x3,
///             2 sin 2pi x1 sin 2pi x2 cos 2pi x3).
pub fn taylor_green_vorticity(grid: GridSpec, amplitude: f64) -> PeriodicVectorField {
    PeriodicVectorField::from_fn(grid, |x| taylor_green_vorticity_at(x, amplitude))
}

/// Pointwise Taylor-Green vorticity.
#[inline]
pub fn taylor_green_vorticity_at(x: [f64; 3], amplitude: f64) -> [f64; 3] {
    let (s1, c1) = (TWO_PI * x[0]).sin_cos();
    let (s2, c2) = (TWO_PI * x[1]).sin_cos();
    let (s3, c3) = (TWO_PI * x[2]).sin_cos();
    let a = TWO_PI * amplitude;
    [-a * c1 * s2 * s3, -a * s1 * c2 * s3, 2.0 * a * s1 * s2 * c3]
}

/// Jacobian of the Taylor-Green velocity: entry (i, j) = d u^i / d x^j.
#[inline]
pub fn taylor_green_jacobian_at(x: [f64; 3], amplitude: f64) -> [[f64; 3]; 3] {
    let (s1, c1) = (TWO_PI * x[0]).sin_cos();
    let (s2, c2) = (TWO_PI * x[1]).sin_cos();
    let (s3, c3) = (TWO_PI * x[2]).sin_cos();
    let a = TWO_PI * amplitude;
    [
        [a * c1 * c2 * c3, -a * s1 * s2 * c3, -a * s1 * c2 * s3],
        [a * s1 * s2 * c3, -a * c1 * c2 * c3, a * c1 * s2 * s3],
        [0.0, 0.0, 0.0],
    ]
}

/// Unidirectional shear b = (amp sin 2pi x2, 0, 0).
pub fn shear(grid: GridSpec, amplitude: f64) -> PeriodicVectorField {
    PeriodicVectorField::from_fn(grid, |x| shear_at(x, amplitude))
}

#[inline]
pub fn shear_at(x: [f64; 3], amplitude: f64) -> [f64; 3] {
    [amplitude * (TWO_PI * x[1]).sin(), 0.0, 0.0]
}

/// Jacobian of the shear flow: only d b^1 / d x^2 is nonzero.
#[inline]
pub fn shear_jacobian_at(x: [f64; 3], amplitude: f64) -> [[f64; 3]; 3] {
    let mut j = [[0.0f64; 3]; 3];
    j[0][1] = amplitude * TWO_PI * (TWO_PI * x[1]).cos();
    j
}

/// A deterministic band-limited random-looking field: a fixed sum of a few
/// low modes with irrational-ish coefficients. Solenoidal variants are
/// produced by taking curls in callers.
pub fn sample_field(grid: GridSpec, seed: u32) -> PeriodicVectorField {
    let s = seed as f64;
    PeriodicVectorField::from_fn(grid, |x| {
        let p1 = TWO_PI * x[0];
        let p2 = TWO_PI * x[1];
        let p3 = TWO_PI * x[2];
        [
            (p1 + 0.3 * s).sin() * (2.0 * p2).cos() + 0.4 * (p3 + 0.7 * s).cos(),
            (2.0 * p1).cos() * (p3 + 0.11 * s).sin() + 0.2 * (p2).sin(),
            (p2 + 0.5 * s).cos() * (p1).sin() + 0.3 * (2.0 * p3).sin(),
        ]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_green_mean_is_zero() {
        let grid = GridSpec::new(8).unwrap();
        let u = taylor_green(grid, 0.3);
        for m in u.mean() {
            assert!(m.abs() < 1e-15);
        }
    }

    #[test]
    fn vorticity_peak_is_4_pi_amplitude() {
        let grid = GridSpec::new(16).unwrap();
        let w = taylor_green_vorticity(grid, 0.1);
        let peak = w.sup_abs();
        assert!((peak - 0.4 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let eps = 1e-6;
        type VelFn = fn([f64; 3], f64) -> [f64; 3];
        type JacFn = fn([f64; 3], f64) -> [[f64; 3]; 3];
        let cases: [(VelFn, JacFn); 2] = [
            (taylor_green_at, taylor_green_jacobian_at),
            (shear_at, shear_jacobian_at),
        ];
        for (f, j) in cases {
            let x = [0.17, 0.43, 0.81];
            let jac = j(x, 0.7);
            for axis in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[axis] += eps;
                xm[axis] -= eps;
                let fp = f(xp, 0.7);
                let fm = f(xm, 0.7);
                for comp in 0..3 {
                    let fd = (fp[comp] - fm[comp]) / (2.0 * eps);
                    assert!(
                        (fd - jac[comp][axis]).abs() < 1e-6,
                        "entry ({comp},{axis}): fd {fd} vs analytic {}",
                        jac[comp][axis]
                    );
                }
            }
        }
    }
}
