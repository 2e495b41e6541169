use thiserror::Error;

/// Errors raised by controller construction, learning, and the demonstration
/// fitter. Numerical routines return these instead of panicking so the runner
/// can surface a diagnostic and exit nonzero.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("degenerate boundary parameters: {0}")]
    DegenerateParameters(String),

    #[error("empty trace")]
    EmptyTrace,

    #[error("empty sequence")]
    EmptySequence,

    #[error("undefined contribution: {0}")]
    UndefinedContribution(String),

    #[error("degenerate power telemetry: denominator {0} is not positive")]
    DegeneratePower(f64),

    #[error("episode {0} is not covered by the schedule")]
    UncoveredEpisode(usize),

    #[error("rank-deficient basis matrix: {0}")]
    RankDeficient(String),

    #[error("invalid demonstration: {0}")]
    InvalidDemonstration(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
