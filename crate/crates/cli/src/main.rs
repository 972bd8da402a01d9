mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;
use weylm::Error;

use crate::commands::Outcome;
use crate::config::{Cli, RunConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_INVALID_INPUT: u8 = 4;
const EXIT_REAL_Z: u8 = 5;
const EXIT_NOT_CONVERGED: u8 = 6;
const EXIT_NUMERICAL: u8 = 7;
const EXIT_CHECK_FAILED: u8 = 8;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) => EXIT_CONFIG,
        Error::Parse(_) | Error::Io(_) => EXIT_IO,
        Error::InvalidHermitian { .. }
        | Error::NonHermitianSample { .. }
        | Error::NonMonotoneGrid { .. }
        | Error::DimError { .. }
        | Error::DegenerateCombination
        | Error::OutOfDomain { .. }
        | Error::GridMismatch(_)
        | Error::UnsupportedSupport(_) => EXIT_INVALID_INPUT,
        Error::RealSpectralParameter { .. } => EXIT_REAL_Z,
        Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_NUMERICAL,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = RunConfig::from_cli(cli).and_then(|cfg| commands::run(&cfg));
    match result {
        Ok(Outcome::Ok(text)) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Ok(Outcome::Failed(text)) => {
            println!("{text}");
            ExitCode::from(EXIT_CHECK_FAILED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
