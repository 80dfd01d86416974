use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod expr;
mod output;
mod verify;

use commands::{Exit, Failure};

#[derive(Parser)]
#[command(name = "gerbeflow", version, about = "Soliton residuals, reduced evolution and constraint solves on flat tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Input state in GFLD format.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Output directory; overrides [io] output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the identity suite and write verify_report.json.
    Verify(Common),
    /// Solve the 2D constraints and write initial_state.gfld.
    SolveConstraints(Common),
    /// Evolve a state and write snapshots plus residuals.csv.
    Evolve(Common),
    /// Select the constraint propagation law and write convention_ledger.json.
    Calibrate(Common),
}

fn set_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("GERBEFLOW_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| Failure::config(format!("GERBEFLOW_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::config(format!("cannot size the thread pool: {e}")))
}

fn run(cli: Cli) -> Result<Exit, Failure> {
    set_threads()?;
    let common = match &cli.command {
        Command::Verify(c) | Command::SolveConstraints(c) | Command::Evolve(c) | Command::Calibrate(c) => c,
    };
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", common.config.display())))?;
    let cfg = config::parse(&text).map_err(|e| Failure::config(e.to_string()))?;
    let out = common.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("."));
    match &cli.command {
        Command::Verify(_) => commands::verify(&cfg, &out),
        Command::SolveConstraints(_) => commands::solve_constraints(&cfg, &out),
        Command::Evolve(c) => commands::evolve(&cfg, c.state.as_deref(), &out),
        Command::Calibrate(_) => commands::calibrate(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { Exit::Config as u8 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(exit) => ExitCode::from(exit as u8),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.exit as u8)
        }
    }
}
