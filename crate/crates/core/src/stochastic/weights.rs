//! Cameron-Martin / Girsanov reweighting of Brownian ensembles: multiplying
//! a path functional by U = exp[int b.dB - (1/2) int |b|^2 ds] turns
//! driftless expectations into drift-b ones.

use crate::drift::Drift;
use crate::error::{Error, Result};
use crate::stochastic::{block_reduce, PathBundle};

/// Log-weights beyond this are flagged: exp overflows f64 shortly above it.
pub const LOG_WEIGHT_GUARD: f64 = 700.0;

/// One path's Girsanov weight. The weight is strictly positive; `overflow`
/// marks log-weights past the exp guard, whose `weight` is unreliable.
#[derive(Debug, Clone, Copy)]
pub struct PathWeight {
    pub log_weight: f64,
    pub weight: f64,
    pub overflow: bool,
}

/// Accumulates U along every path of the bundle with left-point Ito sums:
/// log U = sum_i b(X_i, t_i) . dB_i - (1/2) |b(X_i, t_i)|^2 dt, the drift
/// evaluated at the wrapped position.
pub fn cameron_martin_weight_with<V>(bundle: &PathBundle, velocity: &V) -> Result<Vec<PathWeight>>
where
    V: Fn([f64; 3], f64) -> [f64; 3] + Sync,
{
    let times = bundle.times();
    let dt = bundle.dt();
    let n_steps = bundle.n_steps();

    #[derive(Default)]
    struct Acc(Vec<(usize, PathWeight)>);

    let acc = block_reduce::<Acc, _, _>(
        bundle.n_paths(),
        |acc, p| {
            let pos = bundle.positions(p);
            let inc = bundle.increments(p);
            let mut lw = 0.0;
            for i in 0..n_steps {
                let v = velocity(pos[i], times[i]);
                if !v.iter().all(|c| c.is_finite()) {
                    return Err(Error::NonFiniteDrift {
                        path: p as u64,
                        step: i,
                    });
                }
                let db = inc[i];
                lw += v[0] * db[0] + v[1] * db[1] + v[2] * db[2]
                    - 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) * dt;
            }
            acc.0.push((
                p,
                PathWeight {
                    log_weight: lw,
                    weight: lw.exp(),
                    overflow: lw > LOG_WEIGHT_GUARD,
                },
            ));
            Ok(())
        },
        |out, block| out.0.extend(block.0),
    )?;

    // Blocks arrive in index order, so the concatenation is already sorted.
    debug_assert!(acc.0.windows(2).all(|w| w[0].0 < w[1].0));
    Ok(acc.0.into_iter().map(|(_, w)| w).collect())
}

/// `cameron_martin_weight_with` for a drift specification.
pub fn cameron_martin_weight(bundle: &PathBundle, b: &Drift) -> Result<Vec<PathWeight>> {
    cameron_martin_weight_with(bundle, &|x, t| b.velocity(x, t))
}

/// Upper bound on E[U^gamma] for a drift bounded by `sup_b` over a window of
/// length `span`: exp(gamma (gamma - 1) sup_b^2 span / 2), from the
/// exponential-martingale structure of U.
pub fn exponential_moment_bound(gamma: f64, sup_b: f64, span: f64) -> f64 {
    (0.5 * gamma * (gamma - 1.0) * sup_b * sup_b * span).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::RunningStats;
    use crate::stochastic::{sample_paths, SdeConfig};

    const XI: [f64; 3] = [0.25, 0.5, 0.75];

    #[test]
    fn zero_drift_gives_unit_weights_exactly() {
        let cfg = SdeConfig::new(0.01, 256, 11).unwrap();
        let bundle = sample_paths(XI, 0.0, 0.1, &Drift::Zero, &cfg).unwrap();
        for w in cameron_martin_weight(&bundle, &Drift::Zero).unwrap() {
            assert_eq!(w.log_weight, 0.0);
            assert_eq!(w.weight, 1.0);
            assert!(!w.overflow);
        }
    }

    #[test]
    fn weights_form_a_martingale_with_mean_one() {
        // E U = 1; with 2e4 paths and a moderate drift the sample mean must
        // land within 3 standard errors.
        let n = 20_000;
        let cfg = SdeConfig::new(0.01, n, 314).unwrap();
        let bundle = sample_paths(XI, 0.0, 0.5, &Drift::Zero, &cfg).unwrap();
        let b = Drift::Shear { amplitude: 0.8 };
        let weights = cameron_martin_weight(&bundle, &b).unwrap();
        let mut s = RunningStats::new();
        for w in &weights {
            assert!(w.weight > 0.0);
            assert!(!w.overflow);
            s.push(w.weight);
        }
        assert!(
            (s.mean() - 1.0).abs() < 3.0 * s.std_error(),
            "mean {} +- {}",
            s.mean(),
            s.std_error()
        );
    }

    #[test]
    fn second_moment_respects_the_martingale_bound() {
        let n = 20_000;
        let span = 0.5;
        let cfg = SdeConfig::new(0.01, n, 2718).unwrap();
        let bundle = sample_paths(XI, 0.0, span, &Drift::Zero, &cfg).unwrap();
        let amp = 0.8;
        let b = Drift::Shear { amplitude: amp };
        let weights = cameron_martin_weight(&bundle, &b).unwrap();
        let mut s = RunningStats::new();
        for w in &weights {
            s.push(w.weight * w.weight);
        }
        let bound = exponential_moment_bound(2.0, amp, span);
        assert!(
            s.mean() <= bound + 3.0 * s.std_error(),
            "E[U^2] = {} exceeds {}",
            s.mean(),
            bound
        );
    }

    #[test]
    fn runaway_log_weights_are_flagged() {
        // Handcrafted two-step bundle with dt = 1 and increments of size 800
        // aligned with a unit drift: log U = 2 (800 - 1/2) = 1599, past the
        // exp guard.
        let bundle = PathBundle::from_parts(
            vec![0.0, 1.0, 2.0],
            1,
            vec![[0.5; 3]; 3],
            vec![[0.5; 3]; 3],
            vec![[800.0, 0.0, 0.0]; 2],
            0,
        );
        let weights = cameron_martin_weight(&bundle, &Drift::Constant([1.0, 0.0, 0.0])).unwrap();
        assert_eq!(weights.len(), 1);
        assert!(weights[0].overflow);
        assert!((weights[0].log_weight - 1599.0).abs() < 1e-9);
        assert!(weights[0].log_weight > LOG_WEIGHT_GUARD);
    }
}
