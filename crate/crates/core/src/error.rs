use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model violates one of its structural invariants. The message names
    /// the first violated invariant.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// The reference measure assigns zero intensity to a transition the
    /// observed measure uses, so the relative entropy is infinite.
    #[error("absolute continuity violated: transition {from} -> {to} has positive rate under the first measure but zero under the second")]
    AbsoluteContinuity { from: String, to: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("insufficient horizon: need {needed} time units, trajectory covers {horizon}")]
    InsufficientHorizon { needed: f64, horizon: f64 },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of a numerical routine (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}
