use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("{what} is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { what: String, min_eig: f64 },

    #[error("{what} is not positive definite (min eigenvalue {min_eig:e})")]
    NotPd { what: String, min_eig: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("innovation covariance ill-conditioned (cond {condition:e}) for channels {channels:?}")]
    IllConditioned { condition: f64, channels: Vec<usize> },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("reference growth a^{exponent} with a = {base} overflows the floating range")]
    ExponentOverflow { base: f64, exponent: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
