use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: {dimension} expected {expected}, got {actual}")]
    ShapeMismatch {
        context: String,
        dimension: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("layer cache does not match layer {layer}: {reason}")]
    CacheMismatch { layer: String, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at iteration {iteration}: loss {loss}")]
    Diverged { iteration: usize, loss: f64 },

    #[error("spec parse error on line {line}: {message}")]
    SpecParse { line: usize, message: String },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("sample {id}: {message}")]
    Data { id: String, message: String },

    #[error("metric: {0}")]
    Metric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn shape(
        context: impl Into<String>,
        dimension: impl Into<String>,
        expected: usize,
        actual: usize,
    ) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            dimension: dimension.into(),
            expected,
            actual,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn data(id: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Data {
            id: id.into(),
            message: message.into(),
        }
    }
}
