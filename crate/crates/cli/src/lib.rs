//! Command-line driver: argument handling, trajectory construction, output
//! formats and the `check` and `study-sign` batteries.

pub mod args;
pub mod check;
pub mod commands;
pub mod config;
pub mod output;
pub mod study;
pub mod traj;

use std::ffi::OsString;

use clap::Parser;
use thiserror::Error;

use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NONCONVERGED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NONCONVERGED,
        }
    }
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
    CheckFailed,
}

impl Status {
    fn code(self) -> i32 {
        match self {
            Status::Ok => EXIT_OK,
            Status::NotConverged => EXIT_NONCONVERGED,
            Status::CheckFailed => EXIT_CHECK_FAILED,
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// code. Diagnostics go to standard error.
pub fn run(argv: Vec<OsString>) -> i32 {
    let argv = match config::splice(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: &Command) -> Result<Status, CliError> {
    let threads = command.common().threads;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| match command {
        Command::Mu(m) => commands::mu(m),
        Command::Mu0(c) => commands::mu0(c),
        Command::Flux(c) => commands::flux(c),
        Command::Dynamics(d) => commands::dynamics(d),
        Command::Check(c) => check::run(c),
        Command::StudySign(s) => study::run(s),
    })
}
