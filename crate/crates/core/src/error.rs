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

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid operation on pair ({0}, {1}): {2}")]
    InvalidOp(u64, u64, String),

    #[error("operation on pair ({0}, {1}) would isolate a node")]
    IsolatingOp(u64, u64),

    #[error("node {0} is isolated")]
    IsolatedNode(usize),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("replay mismatch: {0}")]
    Mismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 2,
            Error::SingularDesign(_) | Error::Numerical(_) => 4,
            _ => 3,
        }
    }
}
