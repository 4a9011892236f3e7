mod commands;
mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] maxchain::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Parser, Debug)]
#[command(name = "maxchain", version, about = "Simulate and verify max-stable Markov chains on the sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts and reports.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides `sim.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `section.key=value`, parsed as a TOML value. Repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Draw one innovation field; writes innovation.csv and innovation_field.csv.
    SimulateInnovation,
    /// Run the chain from h ≡ verify.initial for sim.steps steps.
    SimulateChain,
    /// Draw one approximate stationary state.
    Stationary,
    VerifyDrift,
    VerifyMinorization,
    /// Fréchet margins of the innovation, its sup, and the stationary chain.
    VerifyMargins,
    /// Rotation and max-stability of the innovation.
    VerifyStability,
    /// Two chains from h1 and h2 under shared innovations.
    Couple,
    /// Distance to stationarity at the probe, started from h0.
    Convergence,
    /// Every verification in sequence.
    ReportAll,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::SimulateInnovation => "simulate-innovation",
            Command::SimulateChain => "simulate-chain",
            Command::Stationary => "stationary",
            Command::VerifyDrift => "verify-drift",
            Command::VerifyMinorization => "verify-minorization",
            Command::VerifyMargins => "verify-margins",
            Command::VerifyStability => "verify-stability",
            Command::Couple => "couple",
            Command::Convergence => "convergence",
            Command::ReportAll => "report-all",
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let cfg = RunConfig::load(path, &cli.overrides, cli.seed)?;
    let reports = commands::run(cli.command, &cfg, &cli.out)?;
    if reports.is_empty() {
        return Ok(true);
    }
    let mut file = BufWriter::new(File::create(cli.out.join(format!("{}.jsonl", cli.command.name())))?);
    let mut ok = true;
    for r in &reports {
        let line = r.to_json_line();
        writeln!(file, "{line}")?;
        println!("{line}");
        if !r.pass {
            eprintln!("FAIL {line}");
            ok = false;
        }
    }
    file.flush()?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
