//! `pomdp-sensing`: batch front end for the controlled-sensing solver.
//!
//! Each invocation runs one command, writes its artifacts to the output
//! directory and always finishes with `manifest.json`. Exit status 0 means
//! success with every requested check holding, 2 means a check found a
//! violation (artifacts are still written), 1 means bad input.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use output::Artifacts;

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Holds,
    Violation,
}

impl Status {
    pub fn from_holds(holds: bool) -> Self {
        if holds {
            Status::Holds
        } else {
            Status::Violation
        }
    }

    fn exit_code(self) -> i32 {
        match self {
            Status::Holds => 0,
            Status::Violation => 2,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] pomdp_sensing::Error),

    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },

    #[error("output: {0}")]
    Output(#[from] std::io::Error),

    #[error("{0}")]
    Input(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            return ExitCode::from(1);
        }
    }

    let mut artifacts = match Artifacts::new(&cli.out) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: output directory {}: {e}", cli.out.display());
            return ExitCode::from(1);
        }
    };

    let (code, message) = match commands::run(&cli, &mut artifacts) {
        Ok(status) => (status.exit_code(), None),
        Err(e) => (1, Some(e.to_string())),
    };
    if let Some(m) = &message {
        eprintln!("error: {m}");
    } else if code == 2 {
        eprintln!("violation found; see reports in {}", cli.out.display());
    }
    if let Err(e) = artifacts.finish(&cli, code, message.as_deref()) {
        eprintln!("error: writing manifest: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(code as u8)
}
