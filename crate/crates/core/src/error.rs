use thiserror::Error;

/// Errors raised by the detection pipeline and its numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("rank {requested} outside the valid range 1..={max}")]
    RankOutOfRange { requested: usize, max: usize },
    #[error("eigenvalue iteration did not converge within {budget} QR sweeps")]
    ConvergenceFailure { budget: usize },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("empty input")]
    Empty,
    #[error("need at least {needed} observations, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("delay order {order} outside 1..={window}")]
    OrderOutOfRange { order: usize, window: usize },
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },
    #[error("degenerate window: no dynamic mode survives truncation")]
    DegenerateWindow,
    #[error("hyperparameter grid is empty after applying constraints")]
    EmptyGrid,
    #[error("every hyperparameter candidate failed on the burn-in period")]
    AllCandidatesFailed,
    #[error("no run detected the change at or after its location")]
    NoValidRuns,
    #[error("burn-in standard deviation is zero")]
    DegenerateBurnIn,
    #[error("operator is not diagonalisable (eigenvector condition number {condition:e})")]
    NonDiagonalisable { condition: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown scenario `{name}`; valid names: {valid}")]
    UnknownScenario { name: String, valid: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(rows: usize, cols: usize) -> String {
    format!("{rows}x{cols}")
}
