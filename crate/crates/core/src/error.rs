use thiserror::Error;

/// Errors produced by the estimation and testing routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The regressor has zero variance, so the least-squares slope is undefined.
    #[error("regressor has zero variance")]
    DegenerateRegressor,

    #[error("input is empty")]
    EmptyInput,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("series too short: need at least {required} points, got {actual}")]
    TooShort { required: usize, actual: usize },

    #[error("non-finite value at series {series}, time {time}")]
    NonFinite { series: usize, time: usize },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// No series in the panel admits an AR(1) conditional least-squares fit.
    #[error("every series is degenerate; the autoregressive parameter cannot be estimated")]
    AllSeriesDegenerate,

    #[error("variance must be positive, got {value} at index {index}")]
    NonPositiveVariance { index: usize, value: f64 },

    #[error("likelihood optimisation failed to converge from any start")]
    NonConvergence,

    #[error("all {attempted} bootstrap replicates failed")]
    ReplicatesFailed { attempted: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
