use clap::Parser;
use fracopt::config::RunConfig;
use fracopt::runner::{run, Command};
use fracopt::Error;
use std::path::PathBuf;
use std::process::ExitCode;

/// Solvers and optimality checks for control-constrained optimal control
/// of time-fractional diffusion equations.
#[derive(Parser, Debug)]
#[command(name = "fracopt", version, about)]
struct Cli {
    /// One of: solve-state, solve-adjoint, optimize, kkt-check,
    /// convergence-study, limit-study
    command: String,
    /// Path to the TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: config's [output] dir, or ".")
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for all sampling
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, category) = match &e {
                Error::Config(_) => (2, "parse"),
                Error::Invariant(_) | Error::Domain(_) | Error::Shape(_) => (3, "invariant"),
                Error::Solver(_) => (4, "solver"),
                Error::Io(_) => (4, "io"),
            };
            eprintln!("fracopt: {category} error: {e}");
            ExitCode::from(code)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let command = Command::parse(&cli.command)?;
    let config = RunConfig::load(&cli.config)?;
    if let Some(named) = &config.command {
        // the config may name a command; the CLI argument is authoritative,
        // but a mismatch is almost certainly a mistake
        if Command::parse(named)? != command {
            return Err(Error::invariant(format!(
                "config names command '{named}' but '{command}' was requested"
            )));
        }
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let echo = std::fs::read_to_string(&cli.config)?;
    run(&config, command, &out_dir, cli.seed, &echo)?;
    Ok(())
}
