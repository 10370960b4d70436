//! Monte Carlo counterparts of the deterministic solvers: Euler-Maruyama
//! path sampling, Girsanov reweighting, the heat-kernel correction-integral
//! representation, path-ordered Q/Z matrix transports, the backward-path
//! vorticity estimator, and the Bismut score estimator.
//!
//! Determinism contract: every estimator derives the RNG stream of path p
//! from `seed ^ p`, accumulates per fixed-size blocks of consecutive path
//! indices, and merges blocks in index order, so results are bit-identical
//! for a given (seed, config) regardless of thread count.

pub mod bismut;
pub mod kernel;
pub mod matrices;
pub mod vorticity;
pub mod weights;

pub use bismut::{bismut_gradient, free_kernel_evaluator};
pub use kernel::{kernel_mc, KernelEstimate};
pub use matrices::{
    check_q_bound, check_z_bound, integrate_q, integrate_z, matrix_exponential,
    parabolic_gradient_norm, q_along_path, Mat3, QBoundCheck, ZBoundCheck,
};
pub use vorticity::{feynman_kac_vorticity, field_evaluator, VectorEstimate};
pub use weights::{cameron_martin_weight, exponential_moment_bound, PathWeight};

use std::io::Write as IoWrite;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::drift::Drift;
use crate::error::{Error, Result};
use crate::stats;

/// Euler-Maruyama controls. The scheme is fixed: left-point drift and
/// left-point Ito sums; accuracy is governed by `dt` alone.
#[derive(Debug, Clone, Copy)]
pub struct SdeConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl SdeConfig {
    pub fn new(dt: f64, n_paths: usize, seed: u64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::BadConfig(format!(
                "SDE step must be positive, got {dt}"
            )));
        }
        if n_paths == 0 {
            return Err(Error::BadConfig("need at least one path".into()));
        }
        Ok(Self { dt, n_paths, seed })
    }

    /// Number of steps covering `span`; `dt` must divide the span within
    /// round-off.
    pub fn n_steps(&self, span: f64) -> Result<usize> {
        if !(span > 0.0 && span.is_finite()) {
            return Err(Error::NonPositiveTime(span));
        }
        let n = (span / self.dt).round();
        if n < 1.0 || (n * self.dt - span).abs() > 1e-9 * span.max(self.dt) {
            return Err(Error::BadSdeStep { dt: self.dt, span });
        }
        Ok(n as usize)
    }

    /// RNG stream of one path: a ChaCha stream seeded with `seed ^ index`.
    #[inline]
    pub fn path_rng(&self, path_index: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ path_index as u64)
    }
}

#[inline]
pub(crate) fn wrap3(x: [f64; 3]) -> [f64; 3] {
    [
        x[0] - x[0].floor(),
        x[1] - x[1].floor(),
        x[2] - x[2].floor(),
    ]
}

/// Draws one Brownian increment of variance `dt` per component.
#[inline]
pub(crate) fn brownian_increment(rng: &mut ChaCha8Rng, sqrt_dt: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    for o in &mut out {
        let z: f64 = rng.sample(StandardNormal);
        *o = sqrt_dt * z;
    }
    out
}

/// An ensemble of Euler-Maruyama trajectories sharing one time grid.
/// Positions are stored path-major (all steps of path 0, then path 1, ...),
/// both torus-wrapped and on the covering space; unwrapped minus wrapped is
/// an integer lattice vector at every sample.
#[derive(Debug, Clone)]
pub struct PathBundle {
    times: Vec<f64>,
    n_paths: usize,
    wrapped: Vec<[f64; 3]>,
    unwrapped: Vec<[f64; 3]>,
    increments: Vec<[f64; 3]>,
    seed: u64,
}

impl PathBundle {
    /// Test-only assembly from raw parts; production bundles come from
    /// `sample_paths`.
    #[cfg(test)]
    pub(crate) fn from_parts(
        times: Vec<f64>,
        n_paths: usize,
        wrapped: Vec<[f64; 3]>,
        unwrapped: Vec<[f64; 3]>,
        increments: Vec<[f64; 3]>,
        seed: u64,
    ) -> Self {
        Self {
            times,
            n_paths,
            wrapped,
            unwrapped,
            increments,
            seed,
        }
    }

    #[inline]
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    #[inline]
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Torus-wrapped positions of one path, step-ordered.
    #[inline]
    pub fn positions(&self, p: usize) -> &[[f64; 3]] {
        let s = self.times.len();
        &self.wrapped[p * s..(p + 1) * s]
    }

    /// Covering-space positions of one path.
    #[inline]
    pub fn unwrapped_positions(&self, p: usize) -> &[[f64; 3]] {
        let s = self.times.len();
        &self.unwrapped[p * s..(p + 1) * s]
    }

    /// Brownian increments of one path (one per step).
    #[inline]
    pub fn increments(&self, p: usize) -> &[[f64; 3]] {
        let s = self.n_steps();
        &self.increments[p * s..(p + 1) * s]
    }

    /// Final unwrapped position of one path.
    #[inline]
    pub fn endpoint(&self, p: usize) -> [f64; 3] {
        self.unwrapped[(p + 1) * self.times.len() - 1]
    }

    /// Dumps the ensemble in the "PB3D" debug format: magic, version (u32),
    /// n_paths (u32), n_steps (u32), then unwrapped positions as f64
    /// little-endian, path-major and step-ordered, x3 fastest.
    pub fn write_pb3d(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let wrap_err = |source| Error::Io {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::create(path).map_err(wrap_err)?;
        let mut out = std::io::BufWriter::new(file);
        (|| {
            out.write_all(b"PB3D")?;
            out.write_all(&1u32.to_le_bytes())?;
            out.write_all(&(self.n_paths as u32).to_le_bytes())?;
            out.write_all(&(self.n_steps() as u32).to_le_bytes())?;
            for pos in &self.unwrapped {
                for c in pos {
                    out.write_all(&c.to_le_bytes())?;
                }
            }
            out.flush()
        })()
        .map_err(wrap_err)
    }
}

/// Integrates dX = velocity(X, t) dt + dB from X(tau) = xi on [tau, t_end]
/// with the Euler-Maruyama scheme (drift at the left endpoint, evaluated at
/// the wrapped position). The full ensemble is materialized; the streaming
/// estimators in this module avoid that and should be preferred for large
/// path counts.
pub fn sample_paths_with<V>(
    xi: [f64; 3],
    tau: f64,
    t_end: f64,
    velocity: &V,
    cfg: &SdeConfig,
) -> Result<PathBundle>
where
    V: Fn([f64; 3], f64) -> [f64; 3] + Sync,
{
    let n_steps = cfg.n_steps(t_end - tau)?;
    let dt = (t_end - tau) / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let times: Vec<f64> = (0..=n_steps).map(|i| tau + i as f64 * dt).collect();
    let stride = n_steps + 1;
    let n_paths = cfg.n_paths;

    let mut wrapped = vec![[0.0f64; 3]; n_paths * stride];
    let mut unwrapped = vec![[0.0f64; 3]; n_paths * stride];
    let mut increments = vec![[0.0f64; 3]; n_paths * n_steps];

    let block = stats::BLOCK_SIZE as usize;
    let results: Vec<Result<()>> = wrapped
        .par_chunks_mut(block * stride)
        .zip(unwrapped.par_chunks_mut(block * stride))
        .zip(increments.par_chunks_mut(block * n_steps))
        .enumerate()
        .map(|(bi, ((wr, un), inc))| {
            let first = bi * block;
            let in_block = wr.len() / stride;
            for lp in 0..in_block {
                let p = first + lp;
                let mut rng = cfg.path_rng(p);
                let mut x = xi;
                for i in 0..n_steps {
                    let w = wrap3(x);
                    wr[lp * stride + i] = w;
                    un[lp * stride + i] = x;
                    let v = velocity(w, times[i]);
                    if !v.iter().all(|c| c.is_finite()) {
                        return Err(Error::NonFiniteDrift {
                            path: p as u64,
                            step: i,
                        });
                    }
                    let db = brownian_increment(&mut rng, sqrt_dt);
                    inc[lp * n_steps + i] = db;
                    for c in 0..3 {
                        x[c] += v[c] * dt + db[c];
                    }
                }
                wr[lp * stride + n_steps] = wrap3(x);
                un[lp * stride + n_steps] = x;
            }
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }

    Ok(PathBundle {
        times,
        n_paths,
        wrapped,
        unwrapped,
        increments,
        seed: cfg.seed,
    })
}

/// `sample_paths_with` for a drift specification.
pub fn sample_paths(
    xi: [f64; 3],
    tau: f64,
    t_end: f64,
    b: &Drift,
    cfg: &SdeConfig,
) -> Result<PathBundle> {
    sample_paths_with(xi, tau, t_end, &|x, t| b.velocity(x, t), cfg)
}

/// Velocity of the time-reversed diffusion dY = dB - b(Y, t_total - r) dr,
/// with r the path's own clock starting at 0.
pub fn reversed_velocity(b: &Drift, t_total: f64) -> impl Fn([f64; 3], f64) -> [f64; 3] + Sync + '_ {
    move |x, r| {
        let v = b.velocity(x, t_total - r);
        [-v[0], -v[1], -v[2]]
    }
}

/// One scalar estimate destined for the estimates CSV.
#[derive(Debug, Clone, Copy)]
pub struct EstimateRow {
    pub target: [f64; 3],
    pub t: f64,
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Writes scalar estimates as CSV with header
/// `target_x,target_y,target_z,t,value,std_err,n_paths,seed`.
pub fn write_estimates_csv(path: impl AsRef<Path>, rows: &[EstimateRow]) -> Result<()> {
    let path = path.as_ref();
    let wrap_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(wrap_err)?;
    let mut out = std::io::BufWriter::new(file);
    (|| {
        writeln!(out, "target_x,target_y,target_z,t,value,std_err,n_paths,seed")?;
        for r in rows {
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{}",
                r.target[0], r.target[1], r.target[2], r.t, r.value, r.std_error, r.n_paths, r.seed
            )?;
        }
        out.flush()
    })()
    .map_err(wrap_err)
}

/// One vector estimate; expands to three CSV lines (component 1..=3).
#[derive(Debug, Clone, Copy)]
pub struct VectorEstimateRow {
    pub target: [f64; 3],
    pub t: f64,
    pub values: [f64; 3],
    pub std_errors: [f64; 3],
    pub n_paths: usize,
    pub seed: u64,
}

/// Writes vector estimates as CSV with header
/// `target_x,target_y,target_z,t,value,component,std_err,n_paths,seed`.
pub fn write_vector_estimates_csv(
    path: impl AsRef<Path>,
    rows: &[VectorEstimateRow],
) -> Result<()> {
    let path = path.as_ref();
    let wrap_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(wrap_err)?;
    let mut out = std::io::BufWriter::new(file);
    (|| {
        writeln!(
            out,
            "target_x,target_y,target_z,t,value,component,std_err,n_paths,seed"
        )?;
        for r in rows {
            for c in 0..3 {
                writeln!(
                    out,
                    "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.12e},{},{}",
                    r.target[0],
                    r.target[1],
                    r.target[2],
                    r.t,
                    r.values[c],
                    c + 1,
                    r.std_errors[c],
                    r.n_paths,
                    r.seed
                )?;
            }
        }
        out.flush()
    })()
    .map_err(wrap_err)
}

/// Runs `fold` over every path index in parallel blocks of consecutive
/// indices, then merges the per-block accumulators in index order (the
/// determinism contract). `S::default()` starts a block.
pub(crate) fn block_reduce<S, F, M>(n_paths: usize, fold: F, merge: M) -> Result<S>
where
    S: Default + Send,
    F: Fn(&mut S, usize) -> Result<()> + Sync,
    M: Fn(&mut S, S),
{
    let ranges = stats::block_ranges(n_paths as u64, stats::BLOCK_SIZE);
    let partials: Vec<Result<S>> = ranges
        .par_iter()
        .map(|&(a, b)| {
            let mut acc = S::default();
            for p in a..b {
                fold(&mut acc, p as usize)?;
            }
            Ok(acc)
        })
        .collect();
    let mut out = S::default();
    for r in partials {
        merge(&mut out, r?);
    }
    Ok(out)
}
