use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use forecast_workbench::pipeline::{
    cmd_explain, cmd_run, cmd_split_sweep, cmd_synth, Report, RunConfig,
};
use forecast_workbench::{Error, Result};

#[derive(Parser)]
#[command(
    name = "workbench",
    version,
    about = "Forecast, compare, and explain monthly series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; built-in synthetic defaults when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Roster id to explain
    #[arg(long, global = true)]
    model: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Tune, forecast, and score every roster model on the primary split
    Run,
    /// Repeat the evaluation for every configured test window
    Sweep,
    /// Shapley attributions and interpretation products for one model
    Explain,
    /// Write the configured synthetic dataset
    Synth,
}

fn execute(cli: &Cli) -> Result<Report> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    match cli.command {
        Command::Run => cmd_run(&cfg),
        Command::Sweep => cmd_split_sweep(&cfg),
        Command::Synth => cmd_synth(&cfg),
        Command::Explain => {
            let id = cli
                .model
                .as_deref()
                .ok_or_else(|| Error::Config("explain needs --model <id>".into()))?;
            cmd_explain(&cfg, id)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for f in &report.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                ref d if d.is_data_error() => 3,
                _ => 1,
            })
        }
    }
}
