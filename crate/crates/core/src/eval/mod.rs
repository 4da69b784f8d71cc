//! Weighted word-level metrics, exact match, repeated k-fold cross-validation
//! and paired t-tests.

mod cv;
mod metrics;
mod report;
mod rows;
mod ttest;

use thiserror::Error;

pub use cv::{kfold_split, run_cv, word_labels, CvOptions, WordLabels, FoldReport, CV_FOLDS, CV_SEEDS};
pub use metrics::{
    confusion, evaluate, exact_match, mean_report, token_metrics, ClassCounts, MetricsReport, Scorer, WeightedScorer,
};
pub use report::{format_table, write_predictions};
pub use rows::{score_rows, span_labels};
pub use ttest::{paired_ttest, Significance, TTestResult, Verdict};

use crate::corpus::CorpusError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{what}: gold has {gold}, prediction has {pred}")]
    Length { what: &'static str, gold: usize, pred: usize },
    #[error("ids missing from predictions: {missing:?}; ids not in gold: {extra:?}")]
    Ids { missing: Vec<String>, extra: Vec<String> },
    #[error("{0}: predicted text differs from gold text")]
    TextMismatch(String),
    #[error("cannot split {n} examples into {k} folds")]
    Folds { k: usize, n: usize },
    #[error("a paired t-test needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("non-finite score")]
    NonFinite,
    #[error("statistics: {0}")]
    Stats(String),
    #[error("thread pool: {0}")]
    Threads(String),
    #[error("scorer: {0}")]
    Scorer(String),
    #[error("seed {seed} fold {fold}: {source}")]
    Cell {
        seed: u64,
        fold: usize,
        source: Box<EvalError>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}
