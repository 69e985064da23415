use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use roqj::harness::{execute, HarnessError, Overrides, RunConfig, Subcommand};
use roqj::unravel::{Method, UnravelError};

#[derive(Parser, Debug)]
#[command(name = "roqj", version, about = "Quantum jump unravelings of qubit master equations")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `outputs` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; overrides `ensemble.base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides `ensemble.workers`.
    #[arg(long)]
    workers: Option<usize>,
    /// One of mcwf, w_roqj, r_roqj, psi_roqj; overrides `method`.
    #[arg(long)]
    method: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Exact,
    Unravel,
    Scan,
    Domain,
    LambdaSweep,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Exact => Subcommand::Exact,
            Command::Unravel => Subcommand::Unravel,
            Command::Scan => Subcommand::Scan,
            Command::Domain => Subcommand::Domain,
            Command::LambdaSweep => Subcommand::LambdaSweep,
        }
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_POSITIVITY: u8 = 3;
const EXIT_OTHER: u8 = 1;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                HarnessError::Config { .. } => EXIT_CONFIG,
                HarnessError::Unravel(UnravelError::PositivityViolation { .. }) => EXIT_POSITIVITY,
                _ => EXIT_OTHER,
            })
        }
    }
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let (config, bytes) = RunConfig::from_path(&cli.config)?;
    let method = cli
        .method
        .as_deref()
        .map(|m| m.parse::<Method>().map_err(|e| HarnessError::config("--method", &e)))
        .transpose()?;
    let overrides = Overrides { out: cli.out.clone(), seed: cli.seed, workers: cli.workers, method };
    let report = execute(cli.command.into(), &config, &bytes, &overrides)?;
    println!("{}", report.summary);
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
