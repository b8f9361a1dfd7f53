//! Command-line front end for `expander-lab`.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 inadmissible or
//! unsupported type, 3 numerical failure.

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;
use thiserror::Error;

pub mod args;
pub mod commands;
pub mod manifest;
pub mod output;

use args::{Cli, Command};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("inadmissible: {0}")]
    Inadmissible(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("{name}: {message}")]
    Numerical { name: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Inadmissible(_) | CliError::Unsupported(_) => 2,
            CliError::Numerical { .. } => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

/// Parse `argv` (program name first), run the command and return the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap uses 2 for usage errors; 2 is reserved for inadmissible types here.
            let (code, sink): (i32, &mut dyn Write) = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => (0, out),
                _ => (1, err),
            };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Params(a) => commands::params(a, out),
        Command::Solve(a) => commands::solve(a, out),
        Command::Verify(a) => commands::verify(a, out),
        Command::Sweep(a) => commands::sweep(a, out),
        Command::Replay(a) => commands::replay(a, out, err),
    };
    let _ = out.flush();
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
