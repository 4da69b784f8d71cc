//! `ces`: train, decode, evaluate and cross-validate cause/effect span
//! taggers.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 runtime
//! failure.

mod analysis;
mod commands;
mod config;
mod data;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use ces_core::model::Ablation;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use config::{resolve, CommonFlags};

/// A failure caused by the inputs or configuration rather than the run.
#[derive(Debug)]
pub struct Invalid(pub anyhow::Error);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Parser)]
#[command(name = "ces", version, about = "Cause-effect span detection over dependency graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a labelled dataset and write a checkpoint.
    Train {
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Tag a dataset with a checkpoint; writes spans CSV and per-token tags.
    Predict {
        #[command(flatten)]
        common: CommonFlags,
        /// Independent per-token argmax instead of Viterbi decoding.
        #[arg(long)]
        no_viterbi: bool,
    },
    /// Score a predictions file against a gold file.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value_t = ';')]
        delimiter: char,
        /// JSON report destination.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Repeated k-fold cross-validation with paired t-tests between variants.
    Cv {
        #[command(flatten)]
        common: CommonFlags,
        /// Comma-separated ablations; the first is compared with the rest.
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<Ablation>>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        folds: Option<usize>,
        /// Cross-validation cells trained at once.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Finite-difference gradient check on tiny random instances.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        /// d_bert,gnn_hidden,d_gnn; repeat for a grid.
        #[arg(long, default_values_t = vec!["8,6,4".to_string()])]
        dims: Vec<String>,
        /// Comma-separated ablations to check.
        #[arg(long, value_delimiter = ',', default_value = "proposed")]
        ablation: Vec<Ablation>,
        #[arg(long, default_value_t = 6)]
        max_tokens: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Perturb one analytic gradient; the check must then fail.
        #[arg(long)]
        corrupt: bool,
    },
    /// Graph sizes, components and label homophily of a dataset.
    GraphStats {
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Write a generated corpus: dataset.csv, parses.conllu, tokens.jsonl.
    Synth {
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = ';')]
        delimiter: char,
    },
    /// Rerun the command recorded in a manifest and compare outputs.
    Replay { manifest: PathBuf },
}

fn byte(c: char) -> Result<u8> {
    u8::try_from(c).map_err(|_| Invalid(anyhow::anyhow!("delimiter {c:?} is not a single byte")).into())
}

fn invalid<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| Invalid(e).into())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train { common } => commands::run_train(&invalid(resolve(&common, Value::Null))?),
        Command::Predict { common, no_viterbi } => {
            let mut run = invalid(resolve(&common, Value::Null))?;
            commands::predict_mode(&mut run, no_viterbi);
            commands::run_predict(&run)
        }
        Command::Eval {
            gold,
            pred,
            delimiter,
            output,
        } => analysis::run_eval(&gold, &pred, byte(delimiter)?, output.as_deref()),
        Command::Cv {
            common,
            variants,
            seeds,
            folds,
            jobs,
        } => {
            let mut cv = serde_json::Map::new();
            if let Some(v) = variants {
                cv.insert("variants".into(), json!(v));
            }
            if let Some(s) = seeds {
                cv.insert("seeds".into(), json!(s));
            }
            if let Some(f) = folds {
                cv.insert("folds".into(), json!(f));
            }
            if let Some(j) = jobs {
                cv.insert("jobs".into(), json!(j));
            }
            let run = invalid(resolve(&common, json!({ "cv": cv })))?;
            analysis::run_cv_command(&run)
        }
        Command::Gradcheck {
            instances,
            dims,
            ablation,
            max_tokens,
            seed,
            corrupt,
        } => {
            let dims = invalid(dims.iter().map(|d| analysis::parse_dims(d)).collect())?;
            analysis::run_gradcheck(&analysis::GradcheckOptions {
                instances,
                dims,
                ablations: ablation,
                max_tokens,
                seed,
                corrupt,
            })
        }
        Command::GraphStats { common } => analysis::run_graph_stats(&invalid(resolve(&common, Value::Null))?),
        Command::Synth {
            count,
            seed,
            out_dir,
            delimiter,
        } => analysis::run_synth(count, seed, &out_dir, byte(delimiter)?),
        Command::Replay { manifest } => commands::run_replay(&manifest),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CES_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Invalid>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
