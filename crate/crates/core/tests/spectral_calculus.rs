//! Exact identities of the spectral differential operators: vector-calculus
//! compositions that must vanish, heat-semigroup decay, and the Hodge
//! velocity reconstruction.

use num_complex::Complex;
use proptest::prelude::*;

use vortexiter_core::drift::Drift;
use vortexiter_core::field::PeriodicVectorField;
use vortexiter_core::grid::GridSpec;
use vortexiter_core::solver::{reconstruct_velocity, solve_linearized_vorticity, SolveConfig};
use vortexiter_core::{fft, flows, spectral};

fn scalar_from(field: &PeriodicVectorField, comp: usize) -> PeriodicVectorField {
    let mut out = PeriodicVectorField::zeros(field.grid(), 1);
    out.component_mut(0).copy_from_slice(field.component(comp));
    out
}

#[test]
fn divergence_of_curl_vanishes_on_random_fields() {
    for n in [16, 32] {
        let grid = GridSpec::new(n).unwrap();
        for seed in 1..4u32 {
            let f = flows::sample_field(grid, seed);
            let w = spectral::curl(&f).unwrap();
            let div = spectral::max_abs_divergence(&w).unwrap();
            assert!(
                div <= 1e-12 * w.sup_norm(),
                "n={n} seed={seed}: div(curl F) = {div:.3e} vs sup {:.3e}",
                w.sup_norm()
            );
        }
    }
}

#[test]
fn curl_of_gradient_vanishes_on_random_scalars() {
    for n in [16, 32] {
        let grid = GridSpec::new(n).unwrap();
        for seed in 1..4u32 {
            let phi = scalar_from(&flows::sample_field(grid, seed), 0);
            let grad = spectral::gradient_scalar(&phi).unwrap();
            let curl = spectral::curl(&grad).unwrap();
            assert!(
                curl.sup_norm() <= 1e-12 * grad.sup_norm(),
                "n={n} seed={seed}: curl(grad phi) = {:.3e} vs grad sup {:.3e}",
                curl.sup_norm(),
                grad.sup_norm()
            );
        }
    }
}

/// With no drift the nonlinear term is identically zero and the integrating
/// factor advances every mode by the exact heat multiplier, so the whole
/// solve must agree with per-mode decay to rounding.
#[test]
fn drift_free_solve_decays_every_mode_exactly() {
    let grid = GridSpec::new(16).unwrap();
    let w0 = spectral::curl(&flows::sample_field(grid, 5)).unwrap();
    let t_end = 0.1;
    let traj = solve_linearized_vorticity(&w0, &Drift::Zero, &SolveConfig::new(1e-3, t_end))
        .unwrap();
    let w_final = traj.final_vorticity();

    let n = grid.n();
    let two_pi = 2.0 * std::f64::consts::PI;
    let bin = |i: usize| -> f64 {
        if i <= n / 2 {
            i as f64
        } else {
            i as f64 - n as f64
        }
    };
    let mut coeffs0 = Vec::new();
    let mut coeffs1 = Vec::new();
    for c in 0..3 {
        fft::forward_coeffs(grid, w0.component(c), &mut coeffs0);
        fft::forward_coeffs(grid, w_final.component(c), &mut coeffs1);
        let scale: f64 = coeffs0.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for i1 in 0..n {
            for i2 in 0..n {
                for i3 in 0..n {
                    let idx = (i1 * n + i2) * n + i3;
                    let k_sq = bin(i1).powi(2) + bin(i2).powi(2) + bin(i3).powi(2);
                    let factor = (-0.5 * (two_pi * two_pi * k_sq) * t_end).exp();
                    let expected: Complex<f64> = coeffs0[idx] * factor;
                    let err = (coeffs1[idx] - expected).norm();
                    assert!(
                        err <= 1e-12 * scale,
                        "mode ({i1},{i2},{i3}) comp {c}: err {err:.3e} vs scale {scale:.3e}"
                    );
                }
            }
        }
    }
}

#[test]
fn hodge_reconstruction_inverts_curl_on_solenoidal_fields() {
    let grid = GridSpec::new(16).unwrap();
    for seed in 1..6u32 {
        let w = spectral::curl(&flows::sample_field(grid, seed)).unwrap();
        let v = reconstruct_velocity(&w).unwrap();
        let back = spectral::curl(&v).unwrap();
        let err = back.sup_norm_distance(&w);
        assert!(
            err <= 1e-10 * w.sup_norm(),
            "seed={seed}: |curl(BiotSavart w) - w| = {err:.3e}"
        );
        let div_v = spectral::max_abs_divergence(&v).unwrap();
        assert!(div_v <= 1e-12 * v.sup_norm().max(1e-300));
        let mean = v.mean();
        assert!(mean.iter().all(|m| m.abs() <= 1e-13));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Vector-calculus identities are exact for every smooth field the
    /// sampler can produce, at more than one resolution.
    #[test]
    fn spectral_identities_hold_for_sampled_fields(seed in 0u32..10_000, small in proptest::bool::ANY) {
        let n = if small { 8 } else { 16 };
        let grid = GridSpec::new(n).unwrap();
        let f = flows::sample_field(grid, seed);

        let w = spectral::curl(&f).unwrap();
        prop_assert!(spectral::max_abs_divergence(&w).unwrap() <= 1e-12 * w.sup_norm().max(1e-300));
        prop_assert!(w.mean().iter().all(|m| m.abs() <= 1e-13));

        let phi = scalar_from(&f, 1);
        let grad = spectral::gradient_scalar(&phi).unwrap();
        let cg = spectral::curl(&grad).unwrap();
        prop_assert!(cg.sup_norm() <= 1e-12 * grad.sup_norm().max(1e-300));
    }
}
