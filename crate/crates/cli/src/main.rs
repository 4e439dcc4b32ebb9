//! Batch CLI for causal player evaluation: estimate parameters from CSV
//! data, run simulation experiments, and cluster propensity profiles.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "parr",
    about = "Causal standardization metrics for repeated-attempt data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate evaluation parameters from attempt-level CSV data.
    Estimate {
        /// Attempt-level CSV file.
        #[arg(long)]
        data: PathBuf,
        /// Schema JSON describing the CSV columns.
        #[arg(long)]
        schema: PathBuf,
        /// Output directory for result artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Optional run-configuration JSON; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        folds: Option<usize>,
        /// Confidence level for Wald intervals.
        #[arg(long)]
        level: Option<f64>,
        /// Comma-separated estimands: all | direct,indirect,rand.
        #[arg(long, value_delimiter = ',')]
        estimands: Option<Vec<String>>,
        /// Comma-separated estimators: substitution,onestep,tmle.
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<String>>,
        /// Comma-separated player labels or indices, or "all".
        #[arg(long, value_delimiter = ',')]
        players: Option<Vec<String>>,
        /// Fit the fluctuation on pooled out-of-sample predictions.
        #[arg(long)]
        epsilon_pool: bool,
    },
    /// Run a Monte-Carlo experiment on a simulation fixture.
    Simulate {
        /// Bundled fixture name (four-cell, four-cell-tilted, ten-cell,
        /// confounded, kicker) or a path to a fixture JSON.
        #[arg(long)]
        fixture: String,
        /// Scenario: both_correct | mu_misspecified | pi_misspecified |
        /// both_misspecified.
        #[arg(long, default_value = "both_correct")]
        scenario: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Focal player for the estimands.
        #[arg(long, default_value_t = 1)]
        focal: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster players by their cross-fitted propensity profiles.
    Cluster {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        folds: Option<usize>,
        /// Linkage: complete | average | single.
        #[arg(long)]
        linkage: Option<String>,
    },
}

/// CLI failure with the exit code contract: 1 for estimation errors, 2 for
/// configuration and I/O errors.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub kind: &'static str,
    pub code: u8,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            kind: "config",
            code: 2,
        }
    }
}

impl From<parr::Error> for CliError {
    fn from(e: parr::Error) -> Self {
        use parr::Error as E;
        let code = match &e {
            E::Io(_)
            | E::Csv(_)
            | E::Json(_)
            | E::MissingColumn(_)
            | E::NonBinaryOutcome { .. }
            | E::UnparseableValue { .. }
            | E::InvalidConfig(_)
            | E::InvalidDgp(_) => 2,
            _ => 1,
        };
        CliError {
            message: e.to_string(),
            kind: if code == 2 { "config" } else { "estimation" },
            code,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            message: e.to_string(),
            kind: "io",
            code: 2,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError {
            message: e.to_string(),
            kind: "config",
            code: 2,
        }
    }
}

#[derive(Serialize)]
struct ErrorDocument<'a> {
    error: &'a str,
    kind: &'a str,
}

fn load_run_config(
    path: &Option<PathBuf>,
    seed: Option<u64>,
    folds: Option<usize>,
    level: Option<f64>,
    estimands: Option<Vec<String>>,
    estimators: Option<Vec<String>>,
    players: Option<Vec<String>>,
    linkage: Option<String>,
    epsilon_pool: bool,
) -> Result<RunConfig, CliError> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::config(format!("cannot read config '{}': {e}", p.display()))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("invalid config JSON: {e}")))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if folds.is_some() {
        config.folds = folds;
    }
    if let Some(level) = level {
        config.level = level;
    }
    if let Some(estimands) = estimands {
        config.estimands = estimands;
    }
    if let Some(estimators) = estimators {
        config.estimators = estimators;
    }
    if let Some(players) = players {
        config.players = players;
    }
    if let Some(linkage) = linkage {
        config.linkage = linkage;
    }
    if epsilon_pool {
        config.epsilon_pool = true;
    }
    Ok(config)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Estimate {
            data,
            schema,
            out,
            config,
            seed,
            folds,
            level,
            estimands,
            estimators,
            players,
            epsilon_pool,
        } => {
            let config = load_run_config(
                &config,
                seed,
                folds,
                level,
                estimands,
                estimators,
                players,
                None,
                epsilon_pool,
            )?;
            commands::estimate::run(&data, &schema, &out, &config)
        }
        Command::Simulate {
            fixture,
            scenario,
            n,
            reps,
            folds,
            focal,
            seed,
            out,
        } => commands::simulate::run(&fixture, &scenario, n, reps, folds, focal, seed, &out),
        Command::Cluster {
            data,
            schema,
            out,
            config,
            seed,
            folds,
            linkage,
        } => {
            let config =
                load_run_config(&config, seed, folds, None, None, None, None, linkage, false)?;
            commands::cluster::run(&data, &schema, &out, &config)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let doc = ErrorDocument {
                error: &e.message,
                kind: e.kind,
            };
            println!(
                "{}",
                serde_json::to_string(&doc)
                    .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", e.message))
            );
            ExitCode::from(e.code)
        }
    }
}
