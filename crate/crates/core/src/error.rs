use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (bad shape, bad range, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A state invariant was found broken on entry to an operation.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("integrity error: expected {expected} payload bytes, found {actual}")]
    Integrity { expected: usize, actual: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("incompatible state: {0}")]
    Compatibility(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a short description of what was being done.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 config validation, 3 data error, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Contract(_) | Error::Config(_) => 2,
            Error::Parse { .. }
            | Error::Integrity { .. }
            | Error::Io { .. }
            | Error::Compatibility(_)
            | Error::Degenerate(_) => 3,
            Error::Numeric(_) | Error::Invariant(_) => 4,
            Error::Context { .. } => unreachable!("root() strips context"),
        }
    }
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::contract(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
