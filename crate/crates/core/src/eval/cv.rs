//! Seeded k-fold splits and the repeated cross-validation loop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{MetricsReport, Scorer};
use super::EvalError;
use crate::corpus::SpanType;
use crate::model::{train, DecodeMode, ModelConfig, PreparedExample, TrainedModel};
use crate::rng::{shuffle, stream};

pub const CV_SEEDS: [u64; 5] = [916, 703, 443, 229, 585];
pub const CV_FOLDS: usize = 3;

/// Shuffles `0..n` with `seed`, then cuts it into `k` contiguous folds. The
/// first `n % k` folds take one extra item.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k == 0 || k > n {
        return Err(EvalError::Folds { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut order, &mut stream(seed, "folds"));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

/// Collapsed word labels, one list per example.
pub type WordLabels = Vec<Vec<SpanType>>;

/// Gold and predicted collapsed word labels for each example.
pub fn word_labels(
    model: &TrainedModel,
    examples: &[&PreparedExample],
    mode: DecodeMode,
) -> Result<(WordLabels, WordLabels), EvalError> {
    let mut gold = Vec::with_capacity(examples.len());
    let mut pred = Vec::with_capacity(examples.len());
    for e in examples {
        let p = model.predict(e, mode)?;
        gold.push(e.example.gold_word_tags().iter().map(|t| t.collapse()).collect());
        pred.push(p.word_tags.iter().map(|t| t.collapse()).collect());
    }
    Ok((gold, pred))
}

/// One held-out evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub seed: u64,
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug)]
pub struct CvOptions {
    pub seeds: Vec<u64>,
    pub folds: usize,
    pub decode: DecodeMode,
    /// Cells trained at once; 1 keeps everything on the calling thread.
    pub jobs: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            seeds: CV_SEEDS.to_vec(),
            folds: CV_FOLDS,
            decode: DecodeMode::default(),
            jobs: 1,
        }
    }
}

fn run_cell(
    examples: &[PreparedExample],
    config: &ModelConfig,
    folds: &[Vec<usize>],
    seed: u64,
    fold: usize,
    decode: DecodeMode,
    scorer: &dyn Scorer,
) -> Result<FoldReport, EvalError> {
    let cell = |source: EvalError| EvalError::Cell {
        seed,
        fold,
        source: Box::new(source),
    };
    let train_set: Vec<PreparedExample> = folds
        .iter()
        .enumerate()
        .filter(|&(f, _)| f != fold)
        .flat_map(|(_, items)| items.iter().map(|&i| examples[i].clone()))
        .collect();
    let test_set: Vec<&PreparedExample> = folds[fold].iter().map(|&i| &examples[i]).collect();
    let outcome = train(&train_set, config, seed).map_err(|e| cell(e.into()))?;
    let (gold, pred) = word_labels(&outcome.model, &test_set, decode).map_err(cell)?;
    let metrics = scorer.score(&gold, &pred).map_err(cell)?;
    Ok(FoldReport {
        seed,
        fold,
        train_size: train_set.len(),
        test_size: test_set.len(),
        metrics,
    })
}

/// Trains on all but one fold and scores the held-out fold, for every seed
/// and fold. Reports come back ordered by seed, then fold.
pub fn run_cv(
    examples: &[PreparedExample],
    config: &ModelConfig,
    options: &CvOptions,
    scorer: &dyn Scorer,
) -> Result<Vec<FoldReport>, EvalError> {
    let mut cells = Vec::new();
    for &seed in &options.seeds {
        let folds = kfold_split(examples.len(), options.folds, seed)?;
        for fold in 0..options.folds {
            cells.push((seed, fold, folds.clone()));
        }
    }
    let run = |(seed, fold, folds): &(u64, usize, Vec<Vec<usize>>)| {
        log::info!("cross-validation seed {seed} fold {fold}");
        run_cell(examples, config, folds, *seed, *fold, options.decode, scorer)
    };
    if options.jobs <= 1 {
        return cells.iter().map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| EvalError::Threads(e.to_string()))?;
    pool.install(|| cells.par_iter().map(run).collect())
}
