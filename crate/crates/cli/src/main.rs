//! `lazyk`: decode, list, score and time label sequences for document corpora.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 a `--strict` decode
//! left some document without a satisfying sequence.

mod commands;

use std::process::ExitCode;

use clap::Parser;

use commands::{Cli, CliError};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("lazyk: {err:#}");
            ExitCode::from(match err {
                CliError::Usage(_) => 1,
                CliError::Data(_) => 2,
                CliError::Strict(_) => 3,
            })
        }
    }
}
