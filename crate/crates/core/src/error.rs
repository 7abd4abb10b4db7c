use thiserror::Error;

/// Errors raised by the clustering library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("bandwidth must be positive and finite, got {0}")]
    NonPositiveBandwidth(f64),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("kernel matrix bandwidth {matrix} does not match bandwidth split eta {split}")]
    BandwidthMismatch { matrix: f64, split: f64 },

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("requested {k} clusters for {n} points")]
    TooManyClusters { k: usize, n: usize },

    #[error("exact enumeration of {k}-partitions of {n} points exceeds the size budget")]
    ExactTooLarge { n: usize, k: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("partition lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("point is outside the support of every component")]
    UnsupportedPoint,

    #[error("quadrature did not reach relative tolerance {tol:e} (last change {last_change:e})")]
    QuadratureNonConvergence { tol: f64, last_change: f64 },

    #[error("trial is void: {0}")]
    VoidTrial(String),

    #[error("every grid point lies in the exceptional set")]
    VacuousGrid,

    #[error("transport problem failed: {0}")]
    Transport(String),
}

impl Error {
    /// True for failures of a numerical routine rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNonConvergence { .. } | Error::Transport(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
