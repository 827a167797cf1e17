use thiserror::Error;

pub type Result<T> = std::result::Result<T, MfdError>;

#[derive(Debug, Error)]
pub enum MfdError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("unknown manifold kind `{0}` (expected one of: circle, helix, swiss-roll-with-hole, fish-bowl, sphere, sinus-highdim)")]
    UnknownManifold(String),

    #[error("no points")]
    NoPoints,

    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error("vertex {vertex} out of range for graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("dense eigensolve requested for {n} vertices, above the cap of {cap}; use the Chebyshev transform instead")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("signal has zero mean; translate the manifold away from the origin before running bound checks")]
    ZeroMeanSignal,

    #[error("negative eigenvalue {0:.3e} in spectrum")]
    NegativeEigenvalue(f64),

    #[error("degenerate neighbourhood: {0}")]
    Degenerate(String),

    #[error("ground truth is required for this operation")]
    MissingGroundTruth,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MfdError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        MfdError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
