use std::fmt;

use sentivis_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FORMAT: i32 = 3;
pub const EXIT_COMPUTE: i32 = 4;
pub const EXIT_IO: i32 = 5;

/// A failure reported to the user, with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn format(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_FORMAT,
            message: message.into(),
        }
    }

    pub fn compute(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_COMPUTE,
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError {
            code: EXIT_IO,
            message: format!("i/o error on {}: {err}", path.display()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Format { .. } => EXIT_FORMAT,
            Error::Io { .. } => EXIT_IO,
            Error::Shape(_) | Error::InvalidArgument(_) | Error::UndefinedMetric(_) => EXIT_COMPUTE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
