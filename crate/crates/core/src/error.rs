use thiserror::Error;

use crate::saa::Solution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance not SPD")]
    CovarianceNotSpd,

    #[error("marginal parameter domain: {0}")]
    MarginalDomain(String),

    #[error("infinite moment: {0}")]
    InfiniteMoment(String),

    #[error("invalid dependence: {0}")]
    Dependence(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid tail level {0}: must lie in (0, 1)")]
    TailLevel(f64),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("sample too small for tail level: N = {n}, need N >= {min}")]
    SampleTooSmall { n: usize, min: usize },

    #[error("empty feasible set")]
    Infeasible,

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize, best: Box<Solution> },

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("grid solver limited to d <= 3 (got d = {0})")]
    GridDimension(usize),

    #[error("risk level too low for closed form: {0}")]
    ClosedForm(String),

    #[error("too few samples: got {got}, need at least {min}")]
    TooFewSamples { got: usize, min: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
