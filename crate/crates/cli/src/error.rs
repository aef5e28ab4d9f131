use std::fmt;

use lvcomp::error::Error;

/// Exit status of a failed command.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad input file, configuration or flag. Exit code 2.
    Input(String),
    /// A required fit failed or did not converge. Exit code 3.
    Convergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Convergence(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Convergence(m) => write!(f, "convergence failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidRecord { .. }
            | Error::InvalidDataset(_)
            | Error::InvalidParams(_)
            | Error::InsufficientData(_)
            | Error::UnknownScenario(_) => CliError::Input(e.to_string()),
            _ => CliError::Convergence(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
