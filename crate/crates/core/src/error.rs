use thiserror::Error;

/// Errors raised by the laboratory's operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("map is already defined on the torus")]
    AlreadyTorus,

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("carrier is not admissible: {0}")]
    Inadmissible(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("measure has no atoms")]
    EmptyMeasure,

    #[error("sequence violates the Pliss hypotheses: {0}")]
    PlissHypothesis(String),

    #[error("point is not in H at depth {depth}")]
    NotHyperbolic { depth: usize },

    #[error("test dictionaries differ (degree {left} vs {right})")]
    DictionaryMismatch { left: usize, right: usize },

    #[error("curves have disjoint base projections")]
    DisjointCurves,

    #[error("physical-measure report is empty")]
    EmptyReport,

    #[error("source density outside [1/D, D] with D = {d}")]
    DensityOutOfRange { d: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
