use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("resolution must be odd ≥ 17 (got {0})")]
    InvalidResolution(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("disc unresolved: B_{radius}({cx}, {cy}) contains {nodes} nodes (need at least {min})")]
    DiscUnresolved {
        cx: f64,
        cy: f64,
        radius: f64,
        nodes: usize,
        min: usize,
    },

    #[error("disc B_{radius}({cx}, {cy}) leaves the unit disc")]
    DiscOutsideDomain { cx: f64, cy: f64, radius: f64 },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("field structure violated: {0}")]
    Structure(String),

    #[error("solver failure: {reason} (relative residual {residual:e})")]
    SolverFailure { reason: String, residual: f64 },

    #[error("field is not harmonic: harmonic_residual = {residual:e} exceeds {tolerance:e}")]
    NotHarmonic { residual: f64, tolerance: f64 },

    #[error("divergence too large for a vector potential: ‖div w‖/‖∇w‖ = {measured:e} > {tolerance:e}")]
    DivergenceTooLarge { measured: f64, tolerance: f64 },

    #[error("smallness precondition violated: ‖Ω‖_L² = {norm:e} > {threshold:e}")]
    SmallnessViolated { norm: f64, threshold: f64 },

    #[error("gauge step failure after {iterations} Newton iterations (‖T‖ = {residual:e})")]
    StepFailure { iterations: usize, residual: f64 },

    #[error("decomposition failed: continuation stalled at t = {last_t} (step {step:e})")]
    DecompositionFailed { last_t: f64, step: f64 },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last increment {last_increment:e})")]
    NonConvergence {
        iterations: usize,
        last_increment: f64,
        increments: Vec<f64>,
    },

    #[error("no admissible angle in the probe window: {0}")]
    NoGoodAngle(String),

    #[error("snapshot format: {0}")]
    Snapshot(String),
}
