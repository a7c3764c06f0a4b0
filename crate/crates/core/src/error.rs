use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The candidate successor does not start after the predecessor ends.
    #[error("tracks are not linkable: frame gap {delta_t} < 1")]
    NotLinkable { delta_t: i64 },

    #[error("degenerate flow region: {0}")]
    DegenerateRegion(String),

    #[error("undefined metric `{0}`: denominator is zero")]
    UndefinedMetric(&'static str),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid scenario: {0}")]
    ScenarioInvalid(String),

    /// The assignment solver could not produce a trustworthy result.
    #[error("assignment solver failed: {0}")]
    SolverFailure(String),

    #[error("evaluation impossible: {0}")]
    EvaluationImpossible(String),
}
