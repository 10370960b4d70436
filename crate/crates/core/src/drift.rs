//! Time-dependent divergence-free drift fields b(x, t).
//!
//! Drifts come in two flavors: analytic presets (zero, constant, shear,
//! frozen Taylor-Green) evaluated exactly at any point, and grid histories
//! (snapshots on a time grid) interpolated linearly in time and trilinearly
//! in space. The iteration driver exchanges velocity iterates as histories.

use crate::error::{Error, Result};
use crate::field::{PeriodicVectorField, TensorField};
use crate::flows;
use crate::grid::GridSpec;
use crate::spectral;

/// Tolerance on stored history fields: every snapshot must satisfy
/// max |div b| <= this times sup |b| (with an absolute floor for tiny
/// fields).
const SOLENOIDAL_TOL: f64 = 1e-10;

/// Snapshots of a divergence-free velocity field on a strictly increasing
/// time grid starting at 0, defining b(x, t) by linear interpolation in time
/// (clamped at the ends).
#[derive(Debug, Clone)]
pub struct DriftHistory {
    times: Vec<f64>,
    fields: Vec<PeriodicVectorField>,
}

impl DriftHistory {
    /// Builds a history, validating monotone times and solenoidality of
    /// every snapshot.
    pub fn new(times: Vec<f64>, fields: Vec<PeriodicVectorField>) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() || times[0] != 0.0 {
            return Err(Error::BadHistoryTimes);
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::BadHistoryTimes);
        }
        for (t, f) in times.iter().zip(&fields) {
            let div = spectral::max_abs_divergence(f)?;
            let scale = f.sup_abs().max(1.0);
            if div > SOLENOIDAL_TOL * scale {
                return Err(Error::DriftNotSolenoidal { t: *t, div });
            }
        }
        Ok(Self { times, fields })
    }

    /// A history holding one snapshot, treated as constant in time.
    pub fn frozen(field: PeriodicVectorField) -> Result<Self> {
        Self::new(vec![0.0], vec![field])
    }

    /// Internal constructor for fields already known solenoidal (solver
    /// outputs); skips the per-snapshot divergence check.
    pub(crate) fn new_unchecked(times: Vec<f64>, fields: Vec<PeriodicVectorField>) -> Self {
        Self { times, fields }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[PeriodicVectorField] {
        &self.fields
    }

    pub fn grid(&self) -> GridSpec {
        self.fields[0].grid()
    }

    /// Snapshot at exactly the stored time index.
    pub fn field_at_index(&self, i: usize) -> &PeriodicVectorField {
        &self.fields[i]
    }

    /// Interpolation weights: returns (i, j, theta) with the value at `t`
    /// being (1 - theta) * fields[i] + theta * fields[j]. Times outside the
    /// stored range clamp to the ends.
    fn bracket(&self, t: f64) -> (usize, usize, f64) {
        let times = &self.times;
        if t <= times[0] {
            return (0, 0, 0.0);
        }
        let last = times.len() - 1;
        if t >= times[last] {
            return (last, last, 0.0);
        }
        // Binary search for the interval containing t.
        let j = times.partition_point(|&s| s <= t);
        let i = j - 1;
        let theta = (t - times[i]) / (times[j] - times[i]);
        (i, j, theta)
    }

    /// Linear-in-time interpolation of the full field at time `t`, written
    /// into `out`.
    pub fn interpolate_field(&self, t: f64, out: &mut PeriodicVectorField) {
        let (i, j, theta) = self.bracket(t);
        let a = &self.fields[i];
        debug_assert_eq!(out.components(), a.components());
        if i == j || theta == 0.0 {
            out.data_mut().copy_from_slice(a.data());
            return;
        }
        let b = &self.fields[j];
        for ((o, &x), &y) in out
            .data_mut()
            .iter_mut()
            .zip(a.data().iter())
            .zip(b.data().iter())
        {
            *o = (1.0 - theta) * x + theta * y;
        }
    }

    /// Owned interpolated snapshot at time `t`.
    pub fn field_at(&self, t: f64) -> PeriodicVectorField {
        let mut out = PeriodicVectorField::zeros(self.grid(), self.fields[0].components());
        self.interpolate_field(t, &mut out);
        out
    }

    /// Pointwise velocity: trilinear in space, linear in time.
    pub fn velocity(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let (i, j, theta) = self.bracket(t);
        let a = self.fields[i].interpolate(x);
        if i == j || theta == 0.0 {
            return a;
        }
        let b = self.fields[j].interpolate(x);
        [
            (1.0 - theta) * a[0] + theta * b[0],
            (1.0 - theta) * a[1] + theta * b[1],
            (1.0 - theta) * a[2] + theta * b[2],
        ]
    }

    /// Largest pointwise Euclidean norm over stored snapshots.
    pub fn sup_abs(&self) -> f64 {
        self.fields.iter().fold(0.0_f64, |m, f| m.max(f.sup_norm()))
    }
}

/// A drift specification: either an analytic preset or a grid history.
/// Presets also carry exact Jacobians, which the path integrators use to
/// avoid interpolation bias in tests.
#[derive(Debug, Clone)]
pub enum Drift {
    Zero,
    Constant([f64; 3]),
    /// b = (amp sin 2 pi x2, 0, 0)
    Shear { amplitude: f64 },
    /// Frozen (time-independent) Taylor-Green velocity.
    TaylorGreen { amplitude: f64 },
    History(DriftHistory),
}

/// Precomputed Jacobian snapshots for a `Drift::History`, built once per
/// estimator run so pointwise A(b) lookups stay cheap.
#[derive(Debug, Clone)]
pub struct DriftJacobians {
    times: Vec<f64>,
    tensors: Vec<TensorField>,
}

impl DriftJacobians {
    pub fn for_history(h: &DriftHistory) -> Result<Self> {
        let mut tensors = Vec::with_capacity(h.fields.len());
        for f in &h.fields {
            tensors.push(spectral::total_derivative(f)?);
        }
        Ok(Self {
            times: h.times.clone(),
            tensors,
        })
    }

    fn bracket(&self, t: f64) -> (usize, usize, f64) {
        let times = &self.times;
        if t <= times[0] {
            return (0, 0, 0.0);
        }
        let last = times.len() - 1;
        if t >= times[last] {
            return (last, last, 0.0);
        }
        let j = times.partition_point(|&s| s <= t);
        let i = j - 1;
        (i, j, (t - times[i]) / (times[j] - times[i]))
    }

    pub fn jacobian(&self, x: [f64; 3], t: f64) -> [[f64; 3]; 3] {
        let (i, j, theta) = self.bracket(t);
        let a = self.tensors[i].interpolate(x);
        if i == j || theta == 0.0 {
            return a;
        }
        let b = self.tensors[j].interpolate(x);
        let mut out = [[0.0f64; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                out[r][c] = (1.0 - theta) * a[r][c] + theta * b[r][c];
            }
        }
        out
    }
}

/// Pointwise Jacobian provider d b^i / d x^j for any drift: exact for the
/// analytic presets, precomputed spectral-derivative snapshots (interpolated
/// trilinearly / linearly) for histories. Built once per estimator run.
#[derive(Debug, Clone)]
pub struct DriftGradients<'a> {
    drift: &'a Drift,
    table: Option<DriftJacobians>,
}

impl<'a> DriftGradients<'a> {
    pub fn new(drift: &'a Drift) -> Result<Self> {
        let table = match drift {
            Drift::History(h) => Some(DriftJacobians::for_history(h)?),
            _ => None,
        };
        Ok(Self { drift, table })
    }

    pub fn at(&self, x: [f64; 3], t: f64) -> [[f64; 3]; 3] {
        match self.drift {
            Drift::Zero | Drift::Constant(_) => [[0.0; 3]; 3],
            Drift::Shear { amplitude } => flows::shear_jacobian_at(x, *amplitude),
            Drift::TaylorGreen { amplitude } => flows::taylor_green_jacobian_at(x, *amplitude),
            Drift::History(_) => self
                .table
                .as_ref()
                .expect("table is built for history drifts")
                .jacobian(x, t),
        }
    }
}

impl Drift {
    /// Velocity at a point; history drifts interpolate.
    pub fn velocity(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        match self {
            Drift::Zero => [0.0; 3],
            Drift::Constant(c) => *c,
            Drift::Shear { amplitude } => flows::shear_at(x, *amplitude),
            Drift::TaylorGreen { amplitude } => flows::taylor_green_at(x, *amplitude),
            Drift::History(h) => h.velocity(x, t),
        }
    }

    /// Sup-norm bound sup_x |b(x)| (Euclidean) used by CFL limits and
    /// envelope fits.
    pub fn sup_abs(&self) -> f64 {
        match self {
            Drift::Zero => 0.0,
            Drift::Constant(c) => (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt(),
            Drift::Shear { amplitude } => amplitude.abs(),
            // Largest pointwise Euclidean norm of the Taylor-Green velocity
            // is |amplitude| (attained where one product of trig factors
            // is 1).
            Drift::TaylorGreen { amplitude } => amplitude.abs(),
            Drift::History(h) => h.sup_abs(),
        }
    }

    /// Materializes the drift on a grid as a history (analytic presets take
    /// a single frozen snapshot).
    pub fn to_history(&self, grid: GridSpec) -> Result<DriftHistory> {
        match self {
            Drift::History(h) => Ok(h.clone()),
            Drift::Zero => DriftHistory::frozen(PeriodicVectorField::zeros(grid, 3)),
            Drift::Constant(c) => {
                let c = *c;
                DriftHistory::frozen(PeriodicVectorField::from_fn(grid, |_| c))
            }
            Drift::Shear { amplitude } => DriftHistory::frozen(flows::shear(grid, *amplitude)),
            Drift::TaylorGreen { amplitude } => {
                DriftHistory::frozen(flows::taylor_green(grid, *amplitude))
            }
        }
    }
}
