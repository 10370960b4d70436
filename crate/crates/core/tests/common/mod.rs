//! Shared test infrastructure, most importantly a reference Navier-Stokes
//! solver in velocity variables assembled directly on rustfft. It shares no
//! spectral plumbing with the library (its own transforms, wavenumber
//! bookkeeping, dealiasing, and Leray projection), so agreement between the
//! two is a genuine two-route check rather than the same code twice.

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use vortexiter_core::field::PeriodicVectorField;
use vortexiter_core::grid::GridSpec;

type C64 = Complex<f64>;

/// Separable 3-D complex FFT on an n^3 lattice, x3 fastest, with forward
/// coefficients normalized by n^3 so `inverse(forward(f)) = f`.
pub struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    fn apply_axis(&self, data: &mut [C64], axis: usize, inverse: bool) {
        let n = self.n;
        let fft = if inverse { &self.inv } else { &self.fwd };
        let mut line = vec![C64::default(); n];
        match axis {
            2 => {
                for chunk in data.chunks_mut(n) {
                    fft.process(chunk);
                }
            }
            1 => {
                for i1 in 0..n {
                    for i3 in 0..n {
                        for j in 0..n {
                            line[j] = data[(i1 * n + j) * n + i3];
                        }
                        fft.process(&mut line);
                        for j in 0..n {
                            data[(i1 * n + j) * n + i3] = line[j];
                        }
                    }
                }
            }
            0 => {
                for i2 in 0..n {
                    for i3 in 0..n {
                        for j in 0..n {
                            line[j] = data[(j * n + i2) * n + i3];
                        }
                        fft.process(&mut line);
                        for j in 0..n {
                            data[(j * n + i2) * n + i3] = line[j];
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    pub fn forward(&self, real: &[f64]) -> Vec<C64> {
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        let mut c: Vec<C64> = real.iter().map(|&v| C64::new(v, 0.0)).collect();
        for axis in 0..3 {
            self.apply_axis(&mut c, axis, false);
        }
        for v in &mut c {
            *v *= scale;
        }
        c
    }

    pub fn inverse(&self, coeffs: &[C64]) -> Vec<f64> {
        let mut c = coeffs.to_vec();
        for axis in 0..3 {
            self.apply_axis(&mut c, axis, true);
        }
        c.iter().map(|v| v.re).collect()
    }
}

/// Signed wavenumber of bin `i` on an n-point axis.
fn bin_k(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Reference incompressible Navier-Stokes integrator: velocity form
/// u_t = nu Laplace(u) - P[(u . grad) u], integrating-factor Heun in
/// spectral space, 2/3-rule dealiasing on the nonlinear term.
pub struct NseReference {
    n: usize,
    nu: f64,
    fft: Fft3,
    k: [Vec<i64>; 3],
    keep: i64,
}

impl NseReference {
    pub fn new(n: usize, nu: f64) -> Self {
        let len = n * n * n;
        let mut k = [vec![0i64; len], vec![0i64; len], vec![0i64; len]];
        for i1 in 0..n {
            for i2 in 0..n {
                for i3 in 0..n {
                    let idx = (i1 * n + i2) * n + i3;
                    k[0][idx] = bin_k(i1, n);
                    k[1][idx] = bin_k(i2, n);
                    k[2][idx] = bin_k(i3, n);
                }
            }
        }
        Self {
            n,
            nu,
            fft: Fft3::new(n),
            k,
            keep: ((n + 2) / 3) as i64 - 1,
        }
    }

    fn dealias(&self, c: &mut [C64]) {
        for idx in 0..c.len() {
            if self.k[0][idx].abs() > self.keep
                || self.k[1][idx].abs() > self.keep
                || self.k[2][idx].abs() > self.keep
            {
                c[idx] = C64::default();
            }
        }
    }

    /// -P[(u . grad) u] in spectral space; inputs and output dealiased.
    fn nonlinear(&self, u_hat: &[Vec<C64>; 3]) -> [Vec<C64>; 3] {
        let len = u_hat[0].len();
        let two_pi = 2.0 * std::f64::consts::PI;

        let mut ud: Vec<Vec<C64>> = u_hat.iter().map(|c| c.clone()).collect();
        for c in &mut ud {
            self.dealias(c);
        }
        let u_phys: Vec<Vec<f64>> = ud.iter().map(|c| self.fft.inverse(c)).collect();

        // conv_i = sum_j u_j d_j u_i, assembled in physical space.
        let mut conv = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        let mut deriv = vec![C64::default(); len];
        for i in 0..3 {
            for j in 0..3 {
                for idx in 0..len {
                    let ik = C64::new(0.0, two_pi * self.k[j][idx] as f64);
                    deriv[idx] = ud[i][idx] * ik;
                }
                let d_phys = self.fft.inverse(&deriv);
                for idx in 0..len {
                    conv[i][idx] += u_phys[j][idx] * d_phys[idx];
                }
            }
        }

        let mut out = [
            self.fft.forward(&conv[0]),
            self.fft.forward(&conv[1]),
            self.fft.forward(&conv[2]),
        ];
        for c in &mut out {
            self.dealias(c);
        }
        // Leray projection and sign: N = -(I - k k^T / |k|^2) conv.
        for idx in 0..len {
            let kv = [
                self.k[0][idx] as f64,
                self.k[1][idx] as f64,
                self.k[2][idx] as f64,
            ];
            let k_sq = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
            if k_sq == 0.0 {
                for c in &mut out {
                    c[idx] = C64::default();
                }
                continue;
            }
            let dot = out[0][idx] * kv[0] + out[1][idx] * kv[1] + out[2][idx] * kv[2];
            for (c, &kj) in out.iter_mut().zip(&kv) {
                c[idx] = -(c[idx] - dot * (kj / k_sq));
            }
        }
        out
    }

    /// Advances to t_end and returns the velocity at the requested times
    /// (each must sit on the step grid within 1e-9).
    pub fn solve(
        &self,
        u0: &PeriodicVectorField,
        dt: f64,
        t_end: f64,
        snap_times: &[f64],
    ) -> Vec<PeriodicVectorField> {
        assert_eq!(u0.grid().n(), self.n);
        let n_steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
        let dt = t_end / n_steps as f64;
        let len = self.n * self.n * self.n;
        let two_pi = 2.0 * std::f64::consts::PI;

        let decay: Vec<f64> = (0..len)
            .map(|idx| {
                let k_sq = (self.k[0][idx] * self.k[0][idx]
                    + self.k[1][idx] * self.k[1][idx]
                    + self.k[2][idx] * self.k[2][idx]) as f64;
                (-self.nu * (two_pi * two_pi * k_sq) * dt).exp()
            })
            .collect();

        let mut u_hat = [
            self.fft.forward(u0.component(0)),
            self.fft.forward(u0.component(1)),
            self.fft.forward(u0.component(2)),
        ];

        let mut wanted: Vec<f64> = snap_times.to_vec();
        wanted.sort_by(f64::total_cmp);
        let mut out = Vec::new();
        let mut emit = |u_hat: &[Vec<C64>; 3], t: f64, out: &mut Vec<PeriodicVectorField>| {
            while let Some(&next) = wanted.first() {
                if (next - t).abs() < 1e-9 {
                    let grid = GridSpec::new(self.n).unwrap();
                    let mut field = PeriodicVectorField::zeros(grid, 3);
                    for c in 0..3 {
                        let phys = self.fft.inverse(&u_hat[c]);
                        field.component_mut(c).copy_from_slice(&phys);
                    }
                    out.push(field);
                    wanted.remove(0);
                } else {
                    break;
                }
            }
        };

        emit(&u_hat, 0.0, &mut out);
        for s in 0..n_steps {
            let n1 = self.nonlinear(&u_hat);
            let mut stage = [vec![], vec![], vec![]];
            for c in 0..3 {
                stage[c] = (0..len)
                    .map(|idx| (u_hat[c][idx] + n1[c][idx] * dt) * decay[idx])
                    .collect();
            }
            let n2 = self.nonlinear(&stage);
            for c in 0..3 {
                for idx in 0..len {
                    u_hat[c][idx] = u_hat[c][idx] * decay[idx]
                        + (n1[c][idx] * decay[idx] + n2[c][idx]) * (0.5 * dt);
                }
            }
            emit(&u_hat, (s + 1) as f64 * dt, &mut out);
        }
        assert!(
            wanted.is_empty(),
            "snapshot times {wanted:?} not on the step grid"
        );
        out
    }
}
