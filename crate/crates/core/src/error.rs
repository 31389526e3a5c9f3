use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid support [{lo}, {hi}]: bounds must be finite with lo < hi")]
    InvalidSupport { lo: f64, hi: f64 },

    #[error("t = {t} is not allowed: path estimands are only defined for t < 1")]
    ForbiddenEndpoint { t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("row {row}: non-finite value in column `{column}`")]
    NonFinite { row: usize, column: String },

    #[error("row {row}: exposure {value} lies outside the declared support [{lo}, {hi}]")]
    OutOfSupport { row: usize, value: f64, lo: f64, hi: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("ill-conditioned Gram matrix (condition number {condition:.3e}): {diagnosis}")]
    IllConditioned { condition: f64, diagnosis: String },

    #[error("degenerate treatment: residual scale {scale:.3e} is numerically zero")]
    DegenerateTreatment { scale: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("covariance matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("fold {fold}: {source}")]
    Fold { fold: usize, source: Box<Error> },

    #[error("{failed} of {total} replications failed (limit 1%): first error: {first}")]
    TooManyFailures { failed: usize, total: usize, first: String },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singular(_)
            | Error::IllConditioned { .. }
            | Error::DegenerateTreatment { .. }
            | Error::NotPsd { .. }
            | Error::TooManyFailures { .. } => true,
            Error::Fold { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
