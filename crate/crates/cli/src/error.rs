use std::path::Path;

use thiserror::Error;

pub const EXIT_GENERIC: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_COMPAT: i32 = 4;

/// A failed command: message for stderr plus process exit code.
#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError::new(EXIT_GENERIC, message)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::new(EXIT_IO, format!("{}: {e}", path.display()))
    }
}

impl From<wrec::Error> for CliError {
    fn from(e: wrec::Error) -> Self {
        let code = match &e {
            wrec::Error::Io { .. } => EXIT_IO,
            wrec::Error::Capacity { .. } => EXIT_CAPACITY,
            _ => EXIT_GENERIC,
        };
        CliError::new(code, e.to_string())
    }
}
