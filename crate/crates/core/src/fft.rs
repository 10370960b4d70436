use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::PeriodicVectorField;
use crate::grid::GridSpec;

/// Complex Fourier coefficients of a periodic field.
///
/// Coefficients follow the convention f(x) = sum_k c(k) exp(2 pi i k . x)
/// with integer wavevectors k in (-n/2, n/2]^3, stored in FFT bin order with
/// the same row-major layout as field samples (component blocks contiguous).
/// Real fields make the array Hermitian: c(-k) = conj(c(k)).
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: GridSpec,
    components: usize,
    coeffs: Vec<Complex<f64>>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec, components: usize) -> Self {
        assert!(components == 1 || components == 3);
        Self {
            grid,
            components,
            coeffs: vec![Complex::new(0.0, 0.0); components * grid.len()],
        }
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.components
    }

    #[inline]
    pub fn coeffs(&self, c: usize) -> &[Complex<f64>] {
        let len = self.grid.len();
        &self.coeffs[c * len..(c + 1) * len]
    }

    #[inline]
    pub fn coeffs_mut(&mut self, c: usize) -> &mut [Complex<f64>] {
        let len = self.grid.len();
        &mut self.coeffs[c * len..(c + 1) * len]
    }

    /// Coefficient of component `c` at signed wavevector `k`.
    pub fn coeff(&self, c: usize, k: [i64; 3]) -> Complex<f64> {
        let n = self.grid.n() as i64;
        let bin = |ki: i64| -> usize {
            let r = ki.rem_euclid(n);
            r as usize
        };
        self.coeffs(c)[self.grid.idx(bin(k[0]), bin(k[1]), bin(k[2]))]
    }

    /// Forces exact Hermitian symmetry by averaging paired bins; the k = 0
    /// and unpaired (Nyquist) bins become real.
    pub fn enforce_hermitian(&mut self) {
        let n = self.grid.n();
        let len = self.grid.len();
        for c in 0..self.components {
            let block = &mut self.coeffs[c * len..(c + 1) * len];
            for i1 in 0..n {
                let m1 = (n - i1) % n;
                for i2 in 0..n {
                    let m2 = (n - i2) % n;
                    for i3 in 0..n {
                        let m3 = (n - i3) % n;
                        let a = self.grid.idx(i1, i2, i3);
                        let b = self.grid.idx(m1, m2, m3);
                        if a < b {
                            let avg = 0.5 * (block[a] + block[b].conj());
                            block[a] = avg;
                            block[b] = avg.conj();
                        } else if a == b {
                            block[a] = Complex::new(block[a].re, 0.0);
                        }
                    }
                }
            }
        }
    }
}

/// Cached forward/inverse FFT plans per grid size. rustfft plans are
/// reference-counted and thread-safe, so a process-wide cache is shared by
/// every solver.
struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans_for(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// In-place unnormalized 3-D FFT over one component block (n^3 values).
/// `inverse = false` computes sum_j x_j e^{-2 pi i jk/n} along each axis.
fn fft3(grid: GridSpec, data: &mut [Complex<f64>], inverse: bool) {
    let n = grid.n();
    debug_assert_eq!(data.len(), grid.len());
    let plans = plans_for(n);
    let plan = if inverse {
        plans.inverse.clone()
    } else {
        plans.forward.clone()
    };
    let mut row = vec![Complex::new(0.0, 0.0); n];

    // Axis 2 (x3): contiguous rows.
    for chunk in data.chunks_exact_mut(n) {
        plan.process(chunk);
    }
    // Axis 1 (x2): stride n.
    for i1 in 0..n {
        for i3 in 0..n {
            let base = i1 * n * n + i3;
            for i2 in 0..n {
                row[i2] = data[base + i2 * n];
            }
            plan.process(&mut row);
            for i2 in 0..n {
                data[base + i2 * n] = row[i2];
            }
        }
    }
    // Axis 0 (x1): stride n^2.
    let n2 = n * n;
    for i2 in 0..n {
        for i3 in 0..n {
            let base = i2 * n + i3;
            for i1 in 0..n {
                row[i1] = data[base + i1 * n2];
            }
            plan.process(&mut row);
            for i1 in 0..n {
                data[base + i1 * n2] = row[i1];
            }
        }
    }
}

/// Forward transform of one real component into normalized Fourier-series
/// coefficients (result overwrites `out`, which is resized as needed).
pub fn forward_coeffs(grid: GridSpec, samples: &[f64], out: &mut Vec<Complex<f64>>) {
    debug_assert_eq!(samples.len(), grid.len());
    out.clear();
    out.extend(samples.iter().map(|&v| Complex::new(v, 0.0)));
    fft3(grid, out, false);
    let scale = 1.0 / grid.len() as f64;
    for c in out.iter_mut() {
        *c *= scale;
    }
}

/// Inverse transform of normalized coefficients back to real samples
/// (imaginary parts, which are at round-off for Hermitian input, are
/// discarded).
pub fn inverse_to_real(grid: GridSpec, coeffs: &[Complex<f64>], out: &mut [f64]) {
    debug_assert_eq!(coeffs.len(), grid.len());
    debug_assert_eq!(out.len(), grid.len());
    let mut buf = coeffs.to_vec();
    fft3(grid, &mut buf, true);
    for (o, c) in out.iter_mut().zip(&buf) {
        *o = c.re;
    }
}

/// In-place spectral-space transform passes for solvers that keep complex
/// state between steps. Unnormalized; pair them as forward + inverse/n^3.
pub fn fft3_forward(grid: GridSpec, data: &mut [Complex<f64>]) {
    fft3(grid, data, false);
}

pub fn fft3_inverse(grid: GridSpec, data: &mut [Complex<f64>]) {
    fft3(grid, data, true);
}

/// Transforms a sampled field to Fourier-series coefficients with exact
/// Hermitian symmetry. Rejects non-finite input via field construction, so
/// this cannot produce NaN coefficients.
pub fn to_spectral(f: &PeriodicVectorField) -> SpectralField {
    let grid = f.grid();
    let mut sf = SpectralField::zeros(grid, f.components());
    let mut buf = Vec::new();
    for c in 0..f.components() {
        forward_coeffs(grid, f.component(c), &mut buf);
        sf.coeffs_mut(c).copy_from_slice(&buf);
    }
    sf.enforce_hermitian();
    sf
}

/// Inverse of `to_spectral`; errors if the reconstruction is non-finite.
pub fn from_spectral(sf: &SpectralField) -> Result<PeriodicVectorField> {
    let grid = sf.grid();
    let mut out = PeriodicVectorField::zeros(grid, sf.components());
    for c in 0..sf.components() {
        inverse_to_real(grid, sf.coeffs(c), out.component_mut(c));
    }
    if let Some(bad) = out.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(bad));
    }
    Ok(out)
}
