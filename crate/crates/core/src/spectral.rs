//! Exact spectral differential calculus on the unit torus.
//!
//! Derivatives act by multiplication with 2 pi i k in Fourier space. For even
//! grid sizes the unpaired bin k = n/2 has no conjugate partner, so odd-order
//! derivative symbols zero it (the standard choice that keeps derivatives of
//! real fields real); the Laplacian symbol is even and keeps it.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fft::{forward_coeffs, inverse_to_real};
use crate::field::{PeriodicVectorField, TensorField};
use crate::grid::GridSpec;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// First-derivative symbol along `axis`: c(k) *= 2 pi i k_axis, with the
/// Nyquist bin on that axis zeroed.
pub fn derivative_inplace(grid: GridSpec, coeffs: &mut [Complex<f64>], axis: usize) {
    let n = grid.n();
    let half = (n / 2) as i64;
    for i1 in 0..n {
        for i2 in 0..n {
            for i3 in 0..n {
                let k = grid.wavenumber([i1, i2, i3][axis]);
                let idx = grid.idx(i1, i2, i3);
                if k == half {
                    coeffs[idx] = Complex::new(0.0, 0.0);
                } else {
                    let m = TWO_PI * k as f64;
                    let c = coeffs[idx];
                    coeffs[idx] = Complex::new(-m * c.im, m * c.re);
                }
            }
        }
    }
}

/// Laplacian symbol: c(k) *= -|2 pi k|^2 (all bins, Nyquist included).
pub fn laplacian_inplace(grid: GridSpec, coeffs: &mut [Complex<f64>]) {
    let n = grid.n();
    for i1 in 0..n {
        let k1 = grid.wavenumber(i1) as f64;
        for i2 in 0..n {
            let k2 = grid.wavenumber(i2) as f64;
            for i3 in 0..n {
                let k3 = grid.wavenumber(i3) as f64;
                let m = -(TWO_PI * TWO_PI) * (k1 * k1 + k2 * k2 + k3 * k3);
                coeffs[grid.idx(i1, i2, i3)] *= m;
            }
        }
    }
}

/// Zeroes every mode with any |k_i| above the 2/3-rule cutoff.
pub fn dealias_inplace(grid: GridSpec, coeffs: &mut [Complex<f64>]) {
    let n = grid.n();
    let keep = grid.dealias_keep();
    for i1 in 0..n {
        let z1 = grid.wavenumber(i1).abs() > keep;
        for i2 in 0..n {
            let z12 = z1 || grid.wavenumber(i2).abs() > keep;
            for i3 in 0..n {
                if z12 || grid.wavenumber(i3).abs() > keep {
                    coeffs[grid.idx(i1, i2, i3)] = Complex::new(0.0, 0.0);
                }
            }
        }
    }
}

fn require_components(f: &PeriodicVectorField, expected: usize) -> Result<()> {
    if f.components() != expected {
        return Err(Error::WrongComponents {
            expected,
            got: f.components(),
        });
    }
    Ok(())
}

/// Spectral curl of a 3-component field.
pub fn curl(f: &PeriodicVectorField) -> Result<PeriodicVectorField> {
    require_components(f, 3)?;
    let grid = f.grid();
    let mut hat: Vec<Vec<Complex<f64>>> = Vec::with_capacity(3);
    for c in 0..3 {
        let mut buf = Vec::new();
        forward_coeffs(grid, f.component(c), &mut buf);
        hat.push(buf);
    }
    let mut out = PeriodicVectorField::zeros(grid, 3);
    let mut d_a = vec![Complex::new(0.0, 0.0); grid.len()];
    let mut d_b = vec![Complex::new(0.0, 0.0); grid.len()];
    // curl_i = d_j f_k - d_k f_j for cyclic (i, j, k).
    for (i, j, k) in [(0usize, 1usize, 2usize), (1, 2, 0), (2, 0, 1)] {
        d_a.copy_from_slice(&hat[k]);
        derivative_inplace(grid, &mut d_a, j);
        d_b.copy_from_slice(&hat[j]);
        derivative_inplace(grid, &mut d_b, k);
        for (a, b) in d_a.iter_mut().zip(&d_b) {
            *a -= b;
        }
        inverse_to_real(grid, &d_a, out.component_mut(i));
    }
    Ok(out)
}

/// Spectral divergence of a 3-component field, as a scalar field.
pub fn divergence(f: &PeriodicVectorField) -> Result<PeriodicVectorField> {
    require_components(f, 3)?;
    let grid = f.grid();
    let mut acc = vec![Complex::new(0.0, 0.0); grid.len()];
    let mut buf = Vec::new();
    for c in 0..3 {
        forward_coeffs(grid, f.component(c), &mut buf);
        derivative_inplace(grid, &mut buf, c);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b;
        }
    }
    let mut out = PeriodicVectorField::zeros(grid, 1);
    inverse_to_real(grid, &acc, out.component_mut(0));
    Ok(out)
}

/// Spectral gradient of a scalar field, as a 3-component field.
pub fn gradient_scalar(f: &PeriodicVectorField) -> Result<PeriodicVectorField> {
    require_components(f, 1)?;
    let grid = f.grid();
    let mut hat = Vec::new();
    forward_coeffs(grid, f.component(0), &mut hat);
    let mut out = PeriodicVectorField::zeros(grid, 3);
    let mut buf = vec![Complex::new(0.0, 0.0); grid.len()];
    for axis in 0..3 {
        buf.copy_from_slice(&hat);
        derivative_inplace(grid, &mut buf, axis);
        inverse_to_real(grid, &buf, out.component_mut(axis));
    }
    Ok(out)
}

/// Total derivative A(b) of a 3-component field: entry (i, j) = d b^i / d x^j.
/// Its trace equals the divergence pointwise.
pub fn total_derivative(b: &PeriodicVectorField) -> Result<TensorField> {
    require_components(b, 3)?;
    let grid = b.grid();
    let mut out = TensorField::zeros(grid);
    let mut hat = Vec::new();
    let mut buf = vec![Complex::new(0.0, 0.0); grid.len()];
    for i in 0..3 {
        forward_coeffs(grid, b.component(i), &mut hat);
        for j in 0..3 {
            buf.copy_from_slice(&hat);
            derivative_inplace(grid, &mut buf, j);
            inverse_to_real(grid, &buf, out.entry_mut(i, j));
        }
    }
    Ok(out)
}

/// Spectral Laplacian, preserving the component count.
pub fn laplacian(f: &PeriodicVectorField) -> PeriodicVectorField {
    let grid = f.grid();
    let mut out = PeriodicVectorField::zeros(grid, f.components());
    let mut buf = Vec::new();
    for c in 0..f.components() {
        forward_coeffs(grid, f.component(c), &mut buf);
        laplacian_inplace(grid, &mut buf);
        inverse_to_real(grid, &buf, out.component_mut(c));
    }
    out
}

/// Largest |div f| over the grid — the solenoidality diagnostic.
pub fn max_abs_divergence(f: &PeriodicVectorField) -> Result<f64> {
    Ok(divergence(f)?.sup_abs())
}

/// Leray projection onto divergence-free fields: in Fourier space,
/// f^ - k (k . f^) / |k|^2, leaving the mean mode untouched.
pub fn leray_project(f: &PeriodicVectorField) -> Result<PeriodicVectorField> {
    require_components(f, 3)?;
    let grid = f.grid();
    let mut hats: Vec<Vec<Complex<f64>>> = Vec::with_capacity(3);
    for c in 0..3 {
        let mut buf = Vec::new();
        forward_coeffs(grid, f.component(c), &mut buf);
        hats.push(buf);
    }
    let n = grid.n();
    for i1 in 0..n {
        let k1 = grid.wavenumber(i1) as f64;
        for i2 in 0..n {
            let k2 = grid.wavenumber(i2) as f64;
            for i3 in 0..n {
                let k3 = grid.wavenumber(i3) as f64;
                let ksq = k1 * k1 + k2 * k2 + k3 * k3;
                if ksq == 0.0 {
                    continue;
                }
                let idx = grid.idx(i1, i2, i3);
                let dot = hats[0][idx] * k1 + hats[1][idx] * k2 + hats[2][idx] * k3;
                let s = dot / ksq;
                hats[0][idx] -= s * k1;
                hats[1][idx] -= s * k2;
                hats[2][idx] -= s * k3;
            }
        }
    }
    let mut out = PeriodicVectorField::zeros(grid, 3);
    for (c, hat) in hats.iter().enumerate() {
        inverse_to_real(grid, hat, out.component_mut(c));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows;

    #[test]
    fn curl_rejects_scalar_fields() {
        let grid = GridSpec::new(8).unwrap();
        let f = PeriodicVectorField::zeros(grid, 1);
        assert!(matches!(
            curl(&f),
            Err(Error::WrongComponents { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn curl_of_constant_field_is_zero() {
        let grid = GridSpec::new(8).unwrap();
        let f = PeriodicVectorField::from_fn(grid, |_| [0.7, -1.1, 2.2]);
        let c = curl(&f).unwrap();
        assert!(c.sup_abs() < 1e-14);
    }

    #[test]
    fn laplacian_of_single_mode_is_eigenvalue_times_mode() {
        let grid = GridSpec::new(16).unwrap();
        let f = PeriodicVectorField::from_fn(grid, |x| {
            [(TWO_PI * x[0]).sin()]
        });
        let lap = laplacian(&f);
        let factor = -(TWO_PI * TWO_PI);
        let mut worst = 0.0_f64;
        for (l, v) in lap.component(0).iter().zip(f.component(0)) {
            worst = worst.max((l - factor * v).abs());
        }
        assert!(worst < 1e-11, "worst deviation {worst}");
    }

    #[test]
    fn trace_of_total_derivative_matches_divergence() {
        let grid = GridSpec::new(16).unwrap();
        let f = PeriodicVectorField::from_fn(grid, |x| {
            [
                (TWO_PI * x[0]).sin() * (TWO_PI * x[1]).cos(),
                (TWO_PI * 2.0 * x[1]).cos(),
                (TWO_PI * (x[0] + x[2])).sin(),
            ]
        });
        let tr = total_derivative(&f).unwrap().trace();
        let div = divergence(&f).unwrap();
        let mut worst = 0.0_f64;
        for (a, b) in tr.component(0).iter().zip(div.component(0)) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst < 1e-11, "worst deviation {worst}");
    }

    #[test]
    fn taylor_green_is_solenoidal_and_matches_symbolic_curl() {
        let grid = GridSpec::new(16).unwrap();
        let u = flows::taylor_green(grid, 1.0);
        assert!(max_abs_divergence(&u).unwrap() < 1e-12);
        let w_spectral = curl(&u).unwrap();
        let w_symbolic = flows::taylor_green_vorticity(grid, 1.0);
        assert!(w_spectral.sup_distance(&w_symbolic) < 1e-11);
    }
}
