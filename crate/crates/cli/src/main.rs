//! `surgery`: runs the lattice-surgery experiments and writes CSV/JSON results.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 a shot cap ran out
//! (results written and flagged partial), 1 any other failure. Errors are
//! printed to stderr as one JSON object.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use config::Opts;

#[derive(Parser)]
#[command(name = "surgery", version, about = "Lattice-surgery logical error simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Z̄Z̄ measurement: logical rate and timelike fraction over a list of h2.
    ZzSweep(Opts),
    /// Z̄Z̄ measurement at fixed h2 over a list of bridge widths w.
    WSweep(Opts),
    /// CNOT logical channel: 16 class frequencies, factorized fit, symmetry partners.
    CnotChannel(Opts),
    /// Threshold from logical-rate crossings (memory or cnot family).
    Threshold(Opts),
    /// Correlation measure M of d×d×d memory experiments.
    MemoryCorrelation(Opts),
    /// Prints the fault distance of a protocol.
    FaultDistance(Opts),
    /// Checks that every correction closes the sampled faults.
    DecodeCheck(Opts),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Validation,
    Runtime,
    Io,
}

#[derive(Debug)]
pub struct CliError {
    kind: Kind,
    message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> CliError {
        CliError { kind: Kind::Validation, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> CliError {
        CliError { kind: Kind::Runtime, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> CliError {
        CliError { kind: Kind::Io, message: message.into() }
    }

    fn exit_code(&self) -> u8 {
        match self.kind {
            Kind::Validation => 2,
            Kind::Runtime | Kind::Io => 1,
        }
    }

    fn report(&self) {
        let kind = match self.kind {
            Kind::Validation => "validation",
            Kind::Runtime => "runtime",
            Kind::Io => "io",
        };
        eprintln!("{}", serde_json::json!({"error": {"kind": kind, "message": self.message}}));
    }
}

impl From<surgery_core::Error> for CliError {
    fn from(e: surgery_core::Error) -> CliError {
        match e {
            surgery_core::Error::Validation(m) => CliError::invalid(m),
            surgery_core::Error::Consistency(m) => CliError::runtime(m),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            CliError::invalid(e.to_string().trim_end()).report();
            return ExitCode::from(2);
        }
    };
    let (name, opts) = match cli.command {
        Command::ZzSweep(o) => ("zz-sweep", o),
        Command::WSweep(o) => ("w-sweep", o),
        Command::CnotChannel(o) => ("cnot-channel", o),
        Command::Threshold(o) => ("threshold", o),
        Command::MemoryCorrelation(o) => ("memory-correlation", o),
        Command::FaultDistance(o) => ("fault-distance", o),
        Command::DecodeCheck(o) => ("decode-check", o),
    };
    match commands::run(name, opts) {
        Ok(out) if out.partial => {
            CliError::runtime("shot cap reached before the failure target; results flagged partial").report();
            ExitCode::from(3)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            e.report();
            ExitCode::from(e.exit_code())
        }
    }
}
