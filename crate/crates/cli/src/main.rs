//! `uavnav` command-line entry point.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 when
//! training stops on a non-finite value, 1 for anything else.

mod cli;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use uavnav_core::Error;

use cli::{Cli, Command};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::Contract(_) | Error::Generation { .. }) => EXIT_USAGE,
        Some(Error::NumericalAbort(_)) => EXIT_NUMERICAL,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    // clap prints help and usage errors itself and exits with 0 or 2.
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Render(a) => commands::render(a),
        Command::Info(a) => commands::info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
