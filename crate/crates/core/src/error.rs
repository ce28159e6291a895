// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CpbError>;

/// Errors raised by the library.
///
/// `Structural` covers shape and grid mismatches between objects that must agree,
/// `Argument` covers out-of-range parameters, and `Parse` carries the location of
/// the offending input so callers can report it verbatim.
#[derive(Debug, Error)]
pub enum CpbError {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialization(String),
}

impl CpbError {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Self::Structural(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Self::Argument(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad input data rather than bad parameters.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Self::Parse { .. } | Self::Io(_) | Self::Serialization(_)
        )
    }
}

impl From<csv::Error> for CpbError {
    fn from(err: csv::Error) -> Self {
        let location = err
            .position()
            .map(|p| format!("line {}", p.line()))
            .unwrap_or_else(|| "input".to_string());
        Self::Parse {
            location,
            message: err.to_string(),
        }
    }
}

impl From<serde_json::Error> for CpbError {
    fn from(err: serde_json::Error) -> Self {
        Self::Serialization(err.to_string())
    }
}
