//! `kernclust` command-line driver.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::FileConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "kernclust",
    version,
    about = "Kernel-embedding clustering of mixture samples"
)]
pub struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Random seed, also the first seed of experiment batteries.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output CSV path (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

/// Bandwidth flags shared by every command.
#[derive(Debug, Clone, Args)]
pub struct Bandwidths {
    /// KDE bandwidth, or `auto` for (log n / n)^(1/(d+4)).
    #[arg(long)]
    pub beta: Option<String>,
    /// MMD kernel bandwidth.
    #[arg(long)]
    pub zeta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    /// Dataset CSV with header x1,...,xd and an optional label column.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of clusters.
    #[arg(long, short)]
    pub k: Option<usize>,
    /// kmn, ffk, ctr, lnk-single, lnk-complete or lnk-average.
    #[arg(long)]
    pub algorithm: Option<String>,
    #[command(flatten)]
    pub bw: Bandwidths,
    /// Random restarts for kmn.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Exhaustive search for kmn and ctr (small n only).
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BatteryArgs {
    /// thm1, thm3, recovery, bayes or estimation.
    #[arg(long)]
    pub name: Option<String>,
    /// Seeds as `a..b`, `a..=b` or a comma-separated list.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Number of seeds starting at --seed, used when no list is given.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Sample size per trial.
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub bw: Bandwidths,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster a dataset and write per-point labels.
    Cluster(ClusterArgs),
    /// Separation statistics of a labeled dataset against the configured mixture.
    Diagnose {
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        bw: Bandwidths,
        /// Margin of the sufficient separation check.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Estimate a mixing measure from a clustering (or from the input labels).
    Estimate(ClusterArgs),
    /// Run a trial battery over a list of seeds.
    Experiment(BatteryArgs),
    /// Run a trial battery for each value of one parameter.
    Sweep {
        #[command(flatten)]
        battery: BatteryArgs,
        /// n, beta, zeta or separation.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated axis values.
        #[arg(long)]
        values: Option<String>,
    },
    /// Draw a labeled sample from the configured mixture.
    Sample {
        #[arg(long)]
        n: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    if let Some(t) = cli.threads.or(file.threads) {
        if t == 0 {
            return Err(CliError::config("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot start thread pool: {e}")))?;
    }
    let ctx = commands::Context::new(&cli, file);
    match &cli.command {
        Command::Cluster(a) => commands::cluster(&ctx, a),
        Command::Diagnose { input, bw, epsilon } => {
            commands::diagnose(&ctx, input.as_deref(), bw, *epsilon)
        }
        Command::Estimate(a) => commands::estimate(&ctx, a),
        Command::Experiment(a) => commands::experiment(&ctx, a),
        Command::Sweep {
            battery,
            axis,
            values,
        } => commands::sweep(&ctx, battery, axis.as_deref(), values.as_deref()),
        Command::Sample { n } => commands::sample(&ctx, *n),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { CliError::CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kernclust: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
