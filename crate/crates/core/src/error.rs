use alloc::string::String;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Shapes, indices or modes that do not fit together.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A matrix that must be symmetric positive definite is not.
    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    /// A flip-flop covariance update produced a singular Gram matrix.
    #[error("singular covariance update for mode {mode}: scatter matrix is not positive definite")]
    SingularUpdate { mode: usize },

    /// Estimation failed for a reason other than a singular update.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// Numeric failure during training.
    #[error("training failed at epoch {epoch}, batch {batch}: {reason}")]
    Training {
        epoch: usize,
        batch: usize,
        reason: String,
    },

    /// A requested train/test split cannot be realized.
    #[error("infeasible split: {0}")]
    Split(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! arg_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Argument(alloc::format!($($arg)*))
    };
}
pub(crate) use arg_err;
