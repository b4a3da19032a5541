//! `clvkit` — customer-lifetime-value pipeline CLI.
//!
//! Every command is deterministic given its inputs, flags, and seed. Exit
//! codes: 0 on success, 1 on internal failure, 2 on usage or input errors.

mod commands;
mod config;
mod errors;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::errors::{CliError, CliResult};
use crate::experiment::ExperimentArgs;

#[derive(Parser)]
#[command(name = "clvkit", version, about = "Retail CLV prediction pipeline")]
struct Cli {
    /// Cap the worker thread count (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct WindowArgs {
    /// Observation-window end; defaults to the dataset maximum date minus
    /// the horizon. Accepts "DD-MM-YYYY HH:MM", ISO forms, or a bare date.
    #[arg(long)]
    cutoff: Option<String>,

    /// Target-window length in days.
    #[arg(long, default_value_t = 90)]
    horizon: u32,

    /// Recent-frequency window length in days.
    #[arg(long, default_value_t = 90)]
    recent_window: u32,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and clean a raw transaction CSV.
    Ingest {
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Build the per-customer feature table from cleaned transactions.
    Featurize {
        cleaned: PathBuf,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, default_value = "features.csv")]
        out: PathBuf,
    },
    /// Compute the analytic CLV breakdown of a transaction log.
    Clv {
        input: PathBuf,
        /// Business profit margin as a fraction; no default on purpose.
        #[arg(long)]
        profit_margin: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a learner or stack described by a JSON config.
    Train {
        features: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Evaluate one or more saved models on a feature table.
    Evaluate {
        models: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "eval.json")]
        out: PathBuf,
    },
    /// Export feature-importance indicators of a saved tree-ensemble model.
    Importance {
        model: PathBuf,
        #[arg(long, default_value = "importance.csv")]
        out: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run the full pipeline and write the results comparison table.
    Experiment {
        input: PathBuf,
        #[arg(long, default_value = "experiment")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        window: WindowArgs,
    },
}

fn dispatch(command: &Command) -> CliResult<()> {
    match command {
        Command::Ingest { input, out_dir } => commands::cmd_ingest(input, out_dir),
        Command::Featurize { cleaned, window, out } => commands::cmd_featurize(
            cleaned,
            window.cutoff.as_deref(),
            window.horizon,
            window.recent_window,
            out,
        ),
        Command::Clv { input, profit_margin, out } => {
            commands::cmd_clv(input, *profit_margin, out.as_deref())
        }
        Command::Train { features, config, out_dir } => {
            commands::cmd_train(features, config, out_dir)
        }
        Command::Evaluate { models, data, out } => commands::cmd_evaluate(models, data, out),
        Command::Importance { model, out, json } => {
            commands::cmd_importance(model, out, json.as_deref())
        }
        Command::Experiment { input, out_dir, seed, window } => {
            experiment::cmd_experiment(&ExperimentArgs {
                input,
                out_dir,
                seed: *seed,
                cutoff: window.cutoff.as_deref(),
                horizon_days: window.horizon,
                recent_window_days: window.recent_window,
            })
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    match cli.threads {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::internal(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(&cli.command))
        }
        _ => dispatch(&cli.command),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
