use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fourwids::scenario::{self, OUT_DIR_ENV};
use fourwids::Error;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "fourwids", version, about = "Airborne attitude simulation for 4WIDS robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one config and write its telemetry CSV.
    Run {
        config: PathBuf,
        #[arg(short, long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
    },
    /// Simulate two configs and report touchdown and settle deltas.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(short, long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
    },
    /// Run one config per value of a single parameter.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(short, long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
    },
}

fn print_json<T: Serialize>(value: &T) {
    match serde_json::to_string_pretty(value) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("error: {e}"),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnknownParameter(_) | Error::InvalidParams(_) => 2,
        Error::NonFiniteState { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => {
            scenario::run_scenario(&config, &scenario::resolve_out_dir(out)).map(|s| print_json(&s))
        }
        Command::Compare { a, b, out } => {
            scenario::compare(&a, &b, &scenario::resolve_out_dir(out)).map(|c| print_json(&c))
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => scenario::sweep(&config, &param, &values, &scenario::resolve_out_dir(out)).map(|p| print_json(&p)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
