use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("vertex index {index} out of range for a tree with {count} vertices")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("the root has no parent")]
    RootHasNoParent,

    #[error("vertex count overflows the index range (K={branching}, D={depth})")]
    Overflow { branching: usize, depth: usize },

    #[error("matrix of size {size} exceeds the dense-oracle guard of {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("non-finite value at {location}: {detail}")]
    NonFinite { location: String, detail: String },

    #[error("pool is not stationary: {0}")]
    NotStationary(String),

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors that stem from a numerical breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::NotStationary(_))
    }
}
