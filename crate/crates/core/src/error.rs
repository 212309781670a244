use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum FdscError {
    #[error("format error: {0}")]
    Format(String),

    #[error("cannot read image {path}: {reason}")]
    Image { path: PathBuf, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite value in {term}")]
    Numerics { term: String },

    #[error("epoch {epoch}: {source}")]
    Epoch {
        epoch: usize,
        #[source]
        source: Box<FdscError>,
    },

    #[error("client {client}: {source}")]
    Client {
        client: usize,
        #[source]
        source: Box<FdscError>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<FdscError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FdscError {
    pub fn format(msg: impl Into<String>) -> Self {
        FdscError::Format(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        FdscError::Config(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        FdscError::Shape(msg.into())
    }

    pub fn numerics(term: impl Into<String>) -> Self {
        FdscError::Numerics { term: term.into() }
    }

    pub fn at_stage(self, stage: &'static str) -> Self {
        FdscError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips epoch/client/stage wrappers.
    pub fn root(&self) -> &FdscError {
        match self {
            FdscError::Epoch { source, .. }
            | FdscError::Client { source, .. }
            | FdscError::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, FdscError>;
