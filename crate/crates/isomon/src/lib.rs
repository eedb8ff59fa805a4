//! Command-line harness around `isomon-core`: seeded sweeps, flows and
//! monodromy computations that write deterministic CSV, JSON and SVG reports.

pub mod commands;
pub mod config;
pub mod formats;
pub mod literal;
pub mod plot;
pub mod sampling;

use std::path::Path;

use serde::Serialize;

pub const SCHEMA: u32 = 1;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad flags, config keys or literals.
    Usage(String),
    Io(String),
    /// The computation itself gave up: collision, singular contour, step underflow.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical abort: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<isomon_core::Error> for CliError {
    fn from(e: isomon_core::Error) -> Self {
        use isomon_core::Error as E;
        match e {
            E::Modulus(_) | E::Model(_) | E::RootSystem(_) | E::Path(_) | E::NoConstant(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Outcome of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Passed,
    Failed,
}

impl Status {
    pub fn of(passed: bool) -> Status {
        if passed {
            Status::Passed
        } else {
            Status::Failed
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Passed => 0,
            Status::Failed => 2,
        }
    }
}

/// Report header followed by the command's payload.
#[derive(Serialize)]
pub struct Envelope<'a, C: Serialize, B: Serialize> {
    pub schema: u32,
    pub version: &'static str,
    pub command: &'static str,
    pub config: &'a C,
    #[serde(flatten)]
    pub body: &'a B,
}

impl<'a, C: Serialize, B: Serialize> Envelope<'a, C, B> {
    pub fn new(command: &'static str, config: &'a C, body: &'a B) -> Self {
        Envelope { schema: SCHEMA, version: VERSION, command, config, body }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
