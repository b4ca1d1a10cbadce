use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, files or candidates: exit code 1.
    #[error("{}", Located(.line, .column, .message))]
    Input {
        line: Option<usize>,
        column: Option<usize>,
        message: String,
    },
    /// The solver ran but failed: exit code 2.
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

struct Located<'a>(&'a Option<usize>, &'a Option<usize>, &'a String);

impl fmt::Display for Located<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.0, self.1) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.2),
            (Some(l), None) => write!(f, "line {l}: {}", self.2),
            _ => write!(f, "{}", self.2),
        }
    }
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input {
            line: None,
            column: None,
            message: message.into(),
        }
    }

    pub fn at(line: usize, column: usize, message: impl Into<String>) -> Self {
        CliError::Input {
            line: Some(line),
            column: Some(column),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(_) => 2,
            CliError::Input { .. } | CliError::Io(_) => 1,
        }
    }
}

impl From<hahn_varcalc::Error> for CliError {
    fn from(e: hahn_varcalc::Error) -> Self {
        use hahn_varcalc::Error as E;
        match e {
            E::Solver(_) | E::NonConvergence { .. } => CliError::Solver(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::input(format!("csv: {e}"))
    }
}
