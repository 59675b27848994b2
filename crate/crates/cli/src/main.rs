//! `wicdis`: word-in-context disambiguation with Word2Vec and Lemma2Vec
//! context vectors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, UsageError};

#[derive(Debug, Parser)]
#[command(
    name = "wicdis",
    version,
    about = "Context-vector word-in-context disambiguation for Arabic"
)]
struct Cli {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, short, global = true, value_name = "PATH", env = "WICDIS_CONFIG")]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Average word vectors into lemma vectors and write the lemma table.
    #[command(name = "build-lemma2vec")]
    BuildLemma2vec {
        /// Output table path [default: <output-dir>/lemma2vec.txt].
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Tag every instance of a dataset with fixed parameters.
    Classify {
        dataset: PathBuf,
        /// Output path [default: <output-dir>/predictions.json].
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Score the parameter grid on a labeled dataset.
    Tune {
        dataset: PathBuf,
        /// Gold tags; otherwise taken from the dataset's `tag` fields.
        gold: Option<PathBuf>,
        /// Rows in the ranked table.
        #[arg(long, default_value_t = 20)]
        top_k: usize,
    },
    /// Precision, recall, F1 and accuracy of a predictions file.
    Evaluate {
        predictions: PathBuf,
        gold: PathBuf,
        /// Model name shown in the report.
        #[arg(long, default_value = "model")]
        model: String,
    },
    /// Cross-tabulate which instances two models get right.
    Compare {
        predictions_a: PathBuf,
        predictions_b: PathBuf,
        gold: PathBuf,
        #[arg(long, default_value = "A")]
        label_a: String,
        #[arg(long, default_value = "B")]
        label_b: String,
    },
    /// Normalize whitespace-separated tokens from stdin, line by line.
    Normalize,
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("WICDIS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config::usage(format!("WICDIS_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    let mut cfg = match &cli.config {
        Some(path) => config::RunConfig::load(path)?,
        None => config::RunConfig::default(),
    };
    cfg.apply(&cli.overrides);
    cfg.validate()?;
    match cli.command {
        Command::BuildLemma2vec { out } => commands::build_lemma2vec(&cfg, out),
        Command::Classify { dataset, out } => commands::classify(&cfg, &dataset, out),
        Command::Tune { dataset, gold, top_k } => commands::tune(&cfg, &dataset, gold.as_deref(), top_k),
        Command::Evaluate {
            predictions,
            gold,
            model,
        } => commands::evaluate(&cfg, &predictions, &gold, &model),
        Command::Compare {
            predictions_a,
            predictions_b,
            gold,
            label_a,
            label_b,
        } => commands::compare(&cfg, [&predictions_a, &predictions_b], &gold, [&label_a, &label_b]),
        Command::Normalize => commands::normalize(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("wicdis: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("wicdis: {e:#}");
            ExitCode::from(2)
        }
    }
}
