use std::path::PathBuf;

/// Errors raised across the summarization toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric fault in layer {layer}: {detail}")]
    Numeric { layer: usize, detail: String },

    #[error("training diverged at epoch {epoch} (document {document}): loss = {loss}")]
    Diverged {
        epoch: usize,
        document: String,
        loss: f64,
    },

    #[error("checkpoint truncated: tensor `{tensor}` is missing or incomplete")]
    CheckpointTruncated { tensor: String },

    #[error("incompatible checkpoint: {0}")]
    CheckpointIncompatible(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Numeric { .. } | Error::Diverged { .. } => ErrorKind::Numeric,
            Error::Stage { source, .. } => source.kind(),
            Error::Io { .. }
            | Error::Data(_)
            | Error::Contract(_)
            | Error::CheckpointTruncated { .. }
            | Error::CheckpointIncompatible(_) => ErrorKind::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
