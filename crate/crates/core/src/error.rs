//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A probability argument fell outside `[0, 1]`.
    #[error("probability {0} out of range [0, 1]")]
    ProbabilityOutOfRange(f64),

    /// A normalized time fell outside its domain.
    #[error("time {0} out of range [0, 1)")]
    TimeOutOfRange(f64),

    /// Generic invalid input (bad table, degenerate data, bad dimensions).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Target cannot be reached with at most one share per opportunity.
    #[error("infeasible target: Q* = {q_star} outside [1, N] with N = {n_steps}")]
    InfeasibleTarget { q_star: usize, n_steps: usize },

    /// Optimal and deterministic values coincide, the ratio is undefined.
    #[error("performance ratio undefined: |optimal - deterministic| = {0:e}")]
    UndefinedRatio(f64),

    /// The raw closed form is outside its domain near the end of the horizon.
    #[error("end of horizon: N(1-t) = {0} <= 1, raw closed form undefined")]
    EndOfHorizon(f64),

    /// Root bracketing for the shift calibration failed.
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),

    /// A fill-rate field produced a value outside `[0, 1]`.
    #[error("fill-rate field returned {value} at (t = {t}, q = {q}); values must lie in [0, 1]")]
    FieldContract { value: f64, t: f64, q: f64 },

    /// Invalid model or schedule parameters.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// The signal observation rate is too low to realize a schedule.
    #[error(
        "schedule saturates the signal budget: max speed {max_speed} with u = {u}; \
         need u >= {min_u}"
    )]
    SpeedSaturation { max_speed: f64, u: f64, min_u: f64 },

    /// The model was imported without its sample pool and cannot sample.
    #[error("model has no sampler: empirical tables were imported without a sample pool")]
    NoSampler,

    /// Malformed delimited input.
    #[error("csv error on record {record}: {msg}")]
    Csv { record: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
