use thiserror::Error;

/// Errors produced by field construction, solvers, estimators, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size must be even and at least 4, got n = {0}")]
    BadGridSize(usize),

    #[error("field data has {got} values, expected {expected} ({components} component(s) on n = {n})")]
    BadFieldShape {
        got: usize,
        expected: usize,
        components: usize,
        n: usize,
    },

    #[error("field contains a non-finite value at flat index {0}")]
    NonFinite(usize),

    #[error("operation requires a {expected}-component field, got {got}")]
    WrongComponents { expected: usize, got: usize },

    #[error("fields live on different grids (n = {0} vs n = {1})")]
    GridMismatch(usize, usize),

    #[error("Gaussian kernel requires t > 0, got t = {0}")]
    NonPositiveTime(f64),

    #[error("parabolic norm requires a non-empty series covering (tau, T]")]
    EmptySeries,

    #[error("time step {dt} violates the advective CFL limit; need dt <= {max_dt}")]
    CflViolation { dt: f64, max_dt: f64 },

    #[error("solution blew up at t = {t}: sup |w| = {sup} exceeds {limit}")]
    BlowUp { t: f64, sup: f64, limit: f64 },

    #[error("kernel mass drifted by {drift:.3e} at t = {t} (limit 1e-8)")]
    MassDrift { t: f64, drift: f64 },

    #[error("kernel density went negative at t = {t}: min p = {min:.3e}")]
    NegativeDensity { t: f64, min: f64 },

    #[error("drift history must start at t = 0 with strictly increasing times")]
    BadHistoryTimes,

    #[error("drift field at t = {t} is not divergence-free: max |div b| = {div:.3e}")]
    DriftNotSolenoidal { t: f64, div: f64 },

    #[error("input vorticity must be mean-zero and divergence-free (mean = {mean:.3e}, max |div| = {div:.3e})")]
    BadVorticityData { mean: f64, div: f64 },

    #[error("Poisson reconstruction needs mean-zero input, got |mean| = {0:.3e}")]
    NonzeroMean(f64),

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("integral parameters out of range: {0}")]
    BadIntegralParams(String),

    #[error("integrated bound requires d(beta-1)/(2 beta) + alpha/2 < 1, got {0}")]
    ExponentCondition(f64),

    #[error("non-finite drift sample on path {path} at step {step}")]
    NonFiniteDrift { path: u64, step: usize },

    #[error("SDE step {dt} does not divide the horizon {span} evenly")]
    BadSdeStep { dt: f64, span: f64 },

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad magic bytes (expected \"VF3D\")")]
    BadMagic { path: String },

    #[error("{path}: unsupported format version {0}", .version)]
    BadVersion { path: String, version: u32 },

    #[error("{path}: truncated file ({got} of {expected} data bytes)")]
    Truncated {
        path: String,
        got: usize,
        expected: usize,
    },

    #[error("{path}: invalid header field {field} = {value}")]
    BadHeader {
        path: String,
        field: &'static str,
        value: u64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
