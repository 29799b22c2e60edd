//! Error type shared across the crate.

use thiserror::Error;

/// All failure modes, grouped by the exit-code category the CLI maps them to.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid flag/config combination supplied by the caller.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A caller violated an API precondition (dimension mismatch, bad curve
    /// points, series too short).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Unreadable or malformed input data (images, manifests, saliency files).
    #[error("{0}")]
    Data(String),

    /// The embedding backend failed to load or run.
    #[error("backend error: {0}")]
    Backend(String),

    /// An input produced a degenerate (zero-norm) embedding, so a similarity
    /// score cannot be computed for it.
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    /// Short machine-parseable category tag, used as the stderr prefix.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "usage",
            Error::Contract(_) | Error::Data(_) => "data",
            Error::Backend(_) | Error::Degenerate(_) => "backend",
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 backend.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Contract(_) | Error::Data(_) => 2,
            Error::Backend(_) | Error::Degenerate(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_match_categories() {
        assert_eq!(Error::Config("x".into()).exit_code(), 1);
        assert_eq!(Error::Data("x".into()).exit_code(), 2);
        assert_eq!(Error::Contract("x".into()).exit_code(), 2);
        assert_eq!(Error::Backend("x".into()).exit_code(), 3);
        assert_eq!(Error::Degenerate("x".into()).exit_code(), 3);
    }
}
