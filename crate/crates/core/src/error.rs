use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value failed validation. `path` is the dotted key of
    /// the offending field.
    #[error("invalid config at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A transmitter and receiver coincide while the near-field cutoff is zero.
    #[error("coincident nodes (tx {tx}, rx {rx}) with no near-field cutoff; set `attenuation.rho0` > 0")]
    CoincidentNodes { tx: usize, rx: usize },

    #[error("rejection sampling gave up after {attempts} attempts; custom density is likely malformed")]
    RejectionExhausted { attempts: u64 },

    #[error("{count} of {samples} samples were non-finite")]
    NonFinite { count: u64, samples: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Prefix the config path, if any, with an enclosing section name.
    pub fn within(self, section: &str) -> Self {
        match self {
            Error::Config { path, reason } => Error::Config {
                path: format!("{section}.{path}"),
                reason,
            },
            other => other,
        }
    }

    /// True for errors caused by the user's configuration rather than by a
    /// failure while running.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Json(_))
    }
}
