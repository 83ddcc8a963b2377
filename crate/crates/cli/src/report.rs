use std::fmt;
use std::path::Path;

use avf_core::Error;
use serde_json::Value;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_MISMATCH: u8 = 3;
pub const EXIT_PRECISION: u8 = 4;
pub const EXIT_SOLVER: u8 = 5;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Input(String),
    Precision(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Precision(_) => EXIT_PRECISION,
            CliError::Core(e) => match e {
                Error::DimensionMismatch { .. }
                | Error::InvalidInput(_)
                | Error::Parse(_)
                | Error::RootLocation(_) => EXIT_INPUT,
                Error::PrecisionInsufficient(_) | Error::AmbiguousRank { .. } | Error::Singular(_) => {
                    EXIT_PRECISION
                }
                Error::SolverDiverged { .. } => EXIT_SOLVER,
                _ => EXIT_MISMATCH,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(Error::AmbiguousRank { .. }) => {
                write!(f, "{}; rerun with a larger --precision", self.core_message())
            }
            CliError::Core(_) => write!(f, "{}", self.core_message()),
            CliError::Input(m) | CliError::Precision(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn core_message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            _ => String::new(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// One job's output: a JSON document, CSV rows under a shared header, and a
/// verdict exit code.
#[derive(Debug)]
pub struct Report {
    pub json: Value,
    pub csv_header: String,
    pub csv_rows: Vec<String>,
    pub code: u8,
}

impl Report {
    pub fn csv(&self) -> String {
        let mut out = self.csv_header.clone();
        out.push('\n');
        for r in &self.csv_rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }
}

pub fn emit(text: &str, output: Option<&Path>) -> CliResult<()> {
    match output {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}
