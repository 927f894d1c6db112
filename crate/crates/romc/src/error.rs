//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the inference engine.
#[derive(Error, Debug)]
pub enum RomcError {
    /// A caller-supplied argument violated a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A simulator or objective evaluation produced a non-finite or
    /// otherwise unusable value.
    #[error("evaluation failed at theta={theta:?}{}: {message}", seed.map(|s| format!(" (seed {s})")).unwrap_or_default())]
    Evaluation {
        theta: Vec<f64>,
        seed: Option<u64>,
        message: String,
    },

    /// An optimisation run could not produce a usable result.
    #[error("optimisation failed for problem {problem}: {message}")]
    OptimisationFailed { problem: usize, message: String },

    /// A regression or GP fit could not be completed.
    #[error("fit failed: {0}")]
    FitError(String),

    /// No optimisation problem survived filtering; the posterior cannot
    /// be constructed.
    #[error("no accepted regions (min d* = {min_d_star}); consider a larger eps")]
    NoAcceptedRegions { min_d_star: f64 },

    /// Weighted sampling rejected every draw.
    #[error("all {requested} proposed samples were rejected; eps_cutoff is likely too small")]
    EmptySampleSet { requested: usize },

    /// The partition function evaluated to zero on the requested grid.
    #[error("degenerate posterior: partition function is zero at step {step}")]
    DegeneratePosterior { step: f64 },

    /// Rejection sampling ran out of trials before reaching the target.
    #[error("trial budget {max_trials} exhausted with {accepted} acceptances (rate {rate:.3e})")]
    BudgetExceeded {
        accepted: usize,
        max_trials: u64,
        rate: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("report serialisation failed: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, RomcError>;
