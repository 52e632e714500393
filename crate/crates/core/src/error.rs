use alloc::string::String;

use crate::fingerprint::Fingerprint;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The caller violated an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The request is well formed but exceeds what the operation supports.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A run was re-measured with a different result than the cached one.
    #[error("determinism violation for config {config} on instance {instance} seed {seed}")]
    CacheConflict {
        config: Fingerprint,
        instance: Fingerprint,
        seed: u64,
    },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::InvalidInput(alloc::format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
