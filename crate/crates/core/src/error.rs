use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing required dataset file {0}")]
    MissingFile(PathBuf),

    #[error("{file}:{line}: {message}")]
    Format {
        file: String,
        line: usize,
        message: String,
    },

    #[error("label encoding error: {0}")]
    Encoding(String),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("layer {0} is out of range")]
    LayerOutOfRange(String),

    #[error("invalid bit address: {0}")]
    Address(String),

    #[error("planner error: {0}")]
    Planner(String),

    #[error("{0}")]
    Metric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed serialized data: {0}")]
    Decode(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            file: file.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by the input data rather than by the caller or the code.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::MissingFile(_)
                | Error::Format { .. }
                | Error::Encoding(_)
                | Error::Graph(_)
                | Error::Decode(_)
        )
    }
}
