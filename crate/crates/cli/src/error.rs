use std::fmt;
use std::path::Path;

use metacrisp::ErrorClass;

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Consistency(String),
    Internal(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Consistency(_) => 4,
            CliError::Internal(_) => 5,
        }
    }

    pub fn context(self, path: &Path) -> Self {
        let prefix = |m: String| format!("{}: {m}", path.display());
        match self {
            CliError::Usage(m) => CliError::Usage(prefix(m)),
            CliError::Input(m) => CliError::Input(prefix(m)),
            CliError::Consistency(m) => CliError::Consistency(prefix(m)),
            CliError::Internal(m) => CliError::Internal(prefix(m)),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            CliError::Usage(m) => ("usage error", m),
            CliError::Input(m) => ("input error", m),
            CliError::Consistency(m) => ("consistency error", m),
            CliError::Internal(m) => ("internal error", m),
        };
        write!(f, "{kind}: {msg}")
    }
}

impl From<metacrisp::Error> for CliError {
    fn from(e: metacrisp::Error) -> Self {
        match e.class() {
            ErrorClass::Input => CliError::Input(e.to_string()),
            ErrorClass::Consistency => CliError::Consistency(e.to_string()),
        }
    }
}
