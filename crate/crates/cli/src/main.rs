//! `mosaic`: ingest, train, analyze, pipeline, evaluate and simulate.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mosaic_core::CohortConfig;

use commands::{Algo, ArfimaFixture};
use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "mosaic", version, about = "Sequential pairwise ranking with memory-aware user filtering")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.dim_k=16`. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `run.output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Pin sequential execution (overrides `run.deterministic`).
    #[arg(long, global = true, value_name = "BOOL")]
    deterministic: Option<bool>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an interaction file; write stats.csv and interactions.bin.
    Ingest { input: PathBuf },
    /// Split and train one model; write the checkpoint and split manifest.
    Train {
        #[arg(long, value_enum, default_value = "snape")]
        algo: Algo,
        input: PathBuf,
    },
    /// Classify trajectories; write memory_reports.jsonl and d_hat.csv.
    Analyze { trajectories: PathBuf },
    /// Full two-stage run into one directory.
    Pipeline { input: PathBuf },
    /// Score checkpoints on the test side of a split manifest.
    Evaluate {
        #[arg(long)]
        split: PathBuf,
        #[arg(required = true)]
        checkpoints: Vec<PathBuf>,
    },
    /// Generate fixtures.
    #[command(subcommand)]
    Simulate(Simulate),
}

#[derive(Subcommand)]
enum Simulate {
    /// Trajectories with independent ARFIMA(0, d, 0) components, as JSON lines.
    Arfima {
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
        d: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 100)]
        users: usize,
        #[arg(long, default_value_t = 4)]
        components: usize,
        /// Output file.
        #[arg(long = "file")]
        file: PathBuf,
    },
    /// Interaction log of persistent and erratic users (cohort.tsv + persistent_users.txt).
    Cohort {
        #[arg(long, default_value_t = 100)]
        persistent: usize,
        #[arg(long, default_value_t = 100)]
        erratic: usize,
        #[arg(long, default_value_t = 2000)]
        items: usize,
        #[arg(long, default_value_t = 5000)]
        sessions: usize,
        #[arg(long, default_value_t = 0.4)]
        memory: f64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), std::env::vars(), &cli.overrides)?;
    if let Some(d) = cli.deterministic {
        cfg.run.deterministic = d;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.run.output_dir.clone());
    match cli.command {
        Command::Ingest { input } => commands::ingest(&cfg, &input, &out),
        Command::Train { algo, input } => commands::train(&cfg, algo, &input, &out),
        Command::Analyze { trajectories } => commands::analyze(&cfg, &trajectories, &out),
        Command::Pipeline { input } => commands::pipeline(&cfg, &input, &out),
        Command::Evaluate { split, checkpoints } => commands::evaluate_models(&cfg, &split, &checkpoints, &out),
        Command::Simulate(Simulate::Arfima {
            n,
            d,
            sigma,
            users,
            components,
            file,
        }) => commands::simulate_arfima_fixture(
            &cfg,
            &ArfimaFixture {
                n,
                d,
                sigma,
                users,
                components,
            },
            &file,
        ),
        Command::Simulate(Simulate::Cohort {
            persistent,
            erratic,
            items,
            sessions,
            memory,
        }) => commands::simulate_cohort(
            &cfg,
            &CohortConfig {
                persistent_users: persistent,
                erratic_users: erratic,
                n_items: items,
                sessions,
                memory,
                ..CohortConfig::default()
            },
            &out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
