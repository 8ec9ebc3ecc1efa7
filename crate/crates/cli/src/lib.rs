//! Batch driver for the `laughlin` binary.
//!
//! [`run`] parses the command line, merges it with an optional TOML config,
//! validates everything, runs one pipeline and writes its artifacts. The
//! return value is the process exit status:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | a verification check reported a violation |
//! | 2 | usage, config or I/O error |
//! | 3 | numerical non-convergence |
//!
//! A JSON status line goes to stdout on completion; failures print a JSON
//! diagnostic on stderr.

pub mod commands;
pub mod config;
pub mod output;
pub mod prefactor;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;
use laughlin_core::Error;
use serde::Serialize;
use serde_json::{json, Value};

use config::{Cli, OUT_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Core(e) => match e {
                Error::TfNonConvergence { .. }
                | Error::SingularConfiguration(_)
                | Error::SupportClipped { .. }
                | Error::SeriesTooShort { .. }
                | Error::DegenerateSeries => 3,
                Error::InvalidParameter(_)
                | Error::InvalidGrid(_)
                | Error::Precondition(_)
                | Error::NucleusOutsideDomain { .. }
                | Error::ResolutionTooCoarse { .. } => 2,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Core(e) => match e {
                Error::SingularConfiguration(_) => "singular_configuration",
                Error::InvalidParameter(_) => "invalid_parameter",
                Error::ResolutionTooCoarse { .. } => "resolution_too_coarse",
                Error::SeriesTooShort { .. } => "series_too_short",
                Error::DegenerateSeries => "degenerate_series",
                Error::SupportClipped { .. } => "support_clipped",
                Error::NucleusOutsideDomain { .. } => "nucleus_outside_domain",
                Error::InvalidGrid(_) => "invalid_grid",
                Error::TfNonConvergence { .. } => "tf_non_convergence",
                Error::Precondition(_) => "precondition",
            },
        }
    }

    pub fn diagnostic(&self, command: Option<&str>) -> Value {
        json!({
            "status": "error",
            "command": command,
            "kind": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
    }
}

/// How a pipeline ended when it produced its artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Violation,
    NonConvergence,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Violation => 1,
            Status::NonConvergence => 3,
        }
    }

    /// The worse of two statuses; a violation outranks non-convergence.
    pub fn and(self, other: Status) -> Status {
        use Status::*;
        match (self, other) {
            (Violation, _) | (_, Violation) => Violation,
            (NonConvergence, _) | (_, NonConvergence) => NonConvergence,
            _ => Ok,
        }
    }
}

/// One headline number of a run, collected by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SummaryRow {
    pub quantity: String,
    pub label: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub passed: Option<bool>,
}

impl SummaryRow {
    pub fn new(quantity: &str, label: impl Into<String>, value: f64) -> Self {
        SummaryRow {
            quantity: quantity.into(),
            label: label.into(),
            value,
            stderr: None,
            passed: None,
        }
    }

    pub fn stderr(mut self, e: f64) -> Self {
        self.stderr = Some(e);
        self
    }

    pub fn passed(mut self, p: bool) -> Self {
        self.passed = Some(p);
        self
    }
}

/// Result of a pipeline whose artifacts were written.
#[derive(Debug)]
pub struct Outcome {
    pub status: Status,
    pub rows: Vec<SummaryRow>,
}

/// Parse `args` (including the program name) and run the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let d = CliError::Usage(e.to_string().trim_end().to_string()).diagnostic(None);
            eprintln!("{d}");
            return 2;
        }
    };
    let name = cli.command.name();
    match commands::execute(&cli) {
        Ok(report) => {
            println!("{}", report);
            report["exit_code"].as_i64().unwrap_or(0) as i32
        }
        Err(e) => {
            eprintln!("{}", e.diagnostic(Some(name)));
            e.exit_code()
        }
    }
}

/// `--out` if given, otherwise `$LAUGHLIN_OUT/<command>-<hash12>` with
/// `runs` as the fallback root.
pub fn output_dir(explicit: Option<&PathBuf>, command: &str, hash: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.clone();
    }
    let root = std::env::var_os(OUT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(format!("{command}-{}", &hash[..12]))
}
