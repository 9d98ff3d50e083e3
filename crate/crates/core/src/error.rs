use std::path::PathBuf;

/// Errors produced by the simulator and analysis routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("jammer dictionary is rank deficient (pivot {pivot:.3e} at atom {atom})")]
    RankDeficient { atom: usize, pivot: f64 },

    #[error("trial {index}: {source}")]
    Trial {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Returns an `InvalidParameter` error unless `cond` holds.
pub(crate) fn ensure(cond: bool, name: &'static str, reason: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::invalid(name, reason()))
    }
}
