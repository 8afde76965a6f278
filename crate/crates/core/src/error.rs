use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty training stream after subsampling")]
    EmptyStream,

    #[error("token not in vocabulary: {0}")]
    UnknownToken(String),

    #[error("incomparable spaces: vocabulary fingerprints differ ({a} vs {b})")]
    IncomparableSpaces { a: String, b: String },

    #[error("degenerate series: zero variance")]
    DegenerateSeries,

    #[error("series length mismatch or too short (need >= 3 pairs, got {0})")]
    ShortSeries(usize),

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("invalid sweep config: {0}")]
    InvalidConfig(String),

    #[error("bad file format in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
