use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    CellFile { path: PathBuf, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] mmspeed_core::Error),

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("{failed} of {total} requested computations failed")]
    Failed { failed: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, CliError>;
