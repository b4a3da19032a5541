//! Exit-code aware command errors: 2 for usage and input problems, 1 for
//! internal failures.

use std::fmt;
use std::path::Path;

use clvkit_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or bad input data: exit code 2.
    Usage(String),
    /// Anything that went wrong after the inputs checked out: exit code 1.
    Internal(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> CliError {
        CliError::Internal(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => write!(f, "{m}"),
        }
    }
}

/// Core errors that reach a command boundary default to input problems;
/// callers wrap compute-phase errors in `internal` explicitly when needed.
impl From<CoreError> for CliError {
    fn from(err: CoreError) -> CliError {
        CliError::Usage(err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn open_input(path: &Path) -> CliResult<std::fs::File> {
    std::fs::File::open(path)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))
}

pub fn write_output(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::internal(format!("cannot create {}: {e}", path.display())))
}
