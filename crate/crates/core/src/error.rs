use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a documented constraint.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The prototype search could not reach the requested attenuation.
    #[error(
        "cannot reach {target_db:.1} dB stopband attenuation with L={taps} taps \
         (best achieved {best_db:.2} dB)"
    )]
    Design {
        target_db: f64,
        best_db: f64,
        taps: usize,
    },

    #[error("weights became non-finite at block {block}")]
    Divergence { block: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{}:{line}: {message}", path.display())]
    Input {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
