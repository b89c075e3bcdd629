//! Command-line harness around the `timoslip` solver: config parsing, run
//! orchestration and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;

use std::fmt;

pub use config::{parse_config, RunConfig};

/// Process exit status of a failed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExitCode {
    Config = 2,
    Admissibility = 3,
    Divergence = 4,
    IdentityViolation = 5,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError {
            code: ExitCode::Config,
            message: msg.into(),
        }
    }

    pub fn admissibility(msg: impl Into<String>) -> Self {
        CliError {
            code: ExitCode::Admissibility,
            message: msg.into(),
        }
    }

    pub fn context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }

    /// Single line `error[<code>]: <reason>` for stderr.
    pub fn line(&self) -> String {
        let flat: String = self
            .message
            .chars()
            .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        format!(
            "error[{}]: {}",
            self.code as i32,
            flat.split_whitespace().collect::<Vec<_>>().join(" ")
        )
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<timoslip::Error> for CliError {
    fn from(e: timoslip::Error) -> Self {
        use timoslip::Error as E;
        let code = match &e {
            E::Config(_) | E::Domain(_) | E::Resource { .. } | E::InsufficientData { .. } => ExitCode::Config,
            E::NonIntegrable(_) | E::Inadmissible { .. } | E::Stability { .. } => ExitCode::Admissibility,
            E::Divergence { .. } | E::Numerical(_) => ExitCode::Divergence,
            E::IdentityViolation { .. } => ExitCode::IdentityViolation,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::config(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::config(format!("csv: {e}"))
    }
}
