//! Numerical verification of the Gaussian-envelope estimates.
//!
//! The submodules split the work by technique:
//!
//! * [`hermite`] — Gauss-Hermite quadrature and exact radial moments of
//!   shifted Gaussians, the workhorses behind the closed-form integrals.
//! * [`integrals`] — the moment integral `I_{alpha,beta}` of a Brownian
//!   bridge kernel: closed form, Monte Carlo cross-check, and a standard
//!   parameter sweep.
//! * [`inequalities`] — pointwise and time-integrated Gaussian envelope
//!   inequalities, checked on deterministic lattices.
//! * [`envelopes`] — envelope verification for kernel and vorticity
//!   trajectories produced by the deterministic solvers, with fitted
//!   exponential constants.
//!
//! Every check produces a [`BoundCheckReport`] so the CLI can serialize a
//! uniform table regardless of which family the inequality belongs to.

pub mod envelopes;
pub mod hermite;
pub mod inequalities;
pub mod integrals;

pub use envelopes::{
    density_gradient_fields, drift_grad_norm_series, fit_envelope_constants,
    verify_gradient_envelope, verify_kernel_envelope, verify_vorticity_bounds,
    VorticityBoundConfig,
};
pub use inequalities::{
    check_gaussian_inequalities, check_integrated_bound, IntegratedBoundParams,
};
pub use integrals::{
    i_closed_form, i_mc, standard_sweep, IntegralEstimate, IntegralParams,
};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Outcome of checking one inequality over one parameter set.
#[derive(Debug, Clone)]
pub struct BoundCheckReport {
    /// Stable identifier of the inequality family.
    pub inequality_id: String,
    /// JSON object describing the parameters the check ran with.
    pub params: String,
    /// Worst observed ratio of left side to right side (or of observed
    /// constant to fitted cap, for envelope fits).
    pub max_ratio: f64,
    /// Fitted or tightest-sufficient prefactor constant.
    pub c1_fit: f64,
    /// Fitted exponential-rate constant.
    pub c2_fit: f64,
    /// Whether the inequality held everywhere it was sampled.
    pub pass: bool,
}

/// Writes reports as CSV: `inequality_id,param_json,max_ratio,C1_fit,C2_fit,pass`.
///
/// The JSON column is quoted per RFC 4180 (embedded quotes doubled) so the
/// file survives commas inside the parameter object.
pub fn write_bound_reports_csv(path: impl AsRef<Path>, reports: &[BoundCheckReport]) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(out, "inequality_id,param_json,max_ratio,C1_fit,C2_fit,pass").map_err(io_err)?;
    for r in reports {
        let quoted = r.params.replace('"', "\"\"");
        writeln!(
            out,
            "{},\"{}\",{:.17e},{:.17e},{:.17e},{}",
            r.inequality_id, quoted, r.max_ratio, r.c1_fit, r.c2_fit, r.pass
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(())
}
