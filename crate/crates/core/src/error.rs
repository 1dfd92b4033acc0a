use crate::svd_reference::WellPosedness;

/// Crate-wide error type. Numerical contracts are enforced with typed
/// variants rather than panics so callers (CLI, bindings) can map them
/// to exit codes and messages.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("triangular factor is singular at diagonal index {index}")]
    SingularFactor { index: usize },

    #[error("{what} is rank deficient")]
    RankDeficient { what: &'static str },

    #[error("constraint vector is zero")]
    ZeroConstraint,

    #[error("svd did not converge within {iterations} iterations")]
    SvdNonConvergence { iterations: usize },

    #[error("step scaling degenerate: |1 - mu^2 x^T h| = {denom:.3e} is below {limit:.3e}")]
    StepDegenerate { denom: f64, limit: f64 },

    #[error("hemisphere violation: last pseudoinverse coordinate {value:.3e} is not strictly negative")]
    HemisphereViolation { value: f64 },

    #[error("problem is not well posed ({0})")]
    NotWellPosed(WellPosedness),

    #[error("trace unusable for equivalence check: {reason}")]
    TraceIncompatible { reason: String },

    #[error("insufficient data: {reason}")]
    InsufficientData { reason: String },

    #[error("could not draw a generic right factor in {attempts} attempts")]
    ResampleCapExceeded { attempts: usize },

    #[error("{0}")]
    Io(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
