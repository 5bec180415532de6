//! `judgmix` command-line front end.
//!
//! Exit status: 0 success, 1 I/O or other failure, 2 invalid flags or
//! parameter values, 3 malformed input file, 4 EM did not converge, 5 the
//! adaptive stopping rule never fired. For 4 and 5 all outputs are still
//! written.

mod args;
mod cmd;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INPUT_FORMAT: u8 = 3;
pub const EXIT_NOT_CONVERGED: u8 = 4;
pub const EXIT_CRITERION_UNMET: u8 = 5;

/// How a subcommand that produced its outputs finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    NotConverged,
    CriterionUnmet,
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    use judgmix::Error;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Parse { .. } | Error::Json(_) | Error::DimensionMismatch { .. } => EXIT_INPUT_FORMAT,
                Error::Io(_) => EXIT_OTHER,
                _ => EXIT_USAGE,
            };
        }
        if cause.downcast_ref::<output::UsageError>().is_some() {
            return EXIT_USAGE;
        }
    }
    EXIT_OTHER
}

fn main() -> ExitCode {
    let argv = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    let cli = Cli::parse_from(argv);
    let out = output::Reporter::new(cli.quiet);
    let result = match &cli.command {
        Command::Simulate(a) => cmd::simulate::run(a, &out),
        Command::Fit(a) => cmd::fit::run(a, &out),
        Command::Sample(a) => cmd::sample::run(a, &out),
        Command::Transfer(a) => cmd::transfer::run(a, &out),
        Command::Evaluate(a) => cmd::evaluate::run(a, &out),
    };
    match result {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("warning: EM stopped at the iteration cap before converging");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Ok(Status::CriterionUnmet) => {
            eprintln!("warning: input ran out before the stopping rule fired");
            ExitCode::from(EXIT_CRITERION_UNMET)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
