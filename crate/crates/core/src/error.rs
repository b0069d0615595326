use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while validating inputs or running a planning command.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid case: {0}")]
    InvalidCase(String),

    #[error("invalid upgrade catalog: {0}")]
    InvalidCatalog(String),

    #[error("invalid snapshot `{label}`: {msg}")]
    InvalidSnapshot { label: String, msg: String },

    #[error("invalid upgrade plan: {0}")]
    InvalidPlan(String),

    #[error("{location}: {msg}")]
    Parse { location: String, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("enumeration needs n_u <= {limit}, catalog has {n_u} options")]
    TooManyUpgrades { n_u: usize, limit: usize },
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
