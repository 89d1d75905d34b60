use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

mod commands;
mod output;
mod settings;

#[derive(Debug, Parser)]
#[command(
    name = "dca",
    version,
    about = "Dendritic cell algorithm experiments, replay and analysis"
)]
pub struct Cli {
    /// Base seed; overrides `seed` from the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// `key = value` settings file, applied over the defaults of the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for reports, logs and the manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// More log output (-v, -vv). RUST_LOG takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Breast cancer experiments: data orders or a migration threshold sweep.
    Bc(commands::BcArgs),
    /// The four port scan signal experiments.
    Portscan(commands::PortscanArgs),
    /// Write a synthetic port scan session as an event log.
    Generate(commands::GenerateArgs),
    /// Replay an event log into a local tissue or a remote server.
    Replay(commands::ReplayArgs),
    /// Run a tissue server that accepts framed event streams.
    Serve(commands::ServeArgs),
    /// Aggregate migration logs into verdict and process tables.
    Report(commands::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
