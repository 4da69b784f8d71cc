//! Inputs shared by the benchmarks.

use std::collections::HashMap;

use ces_core::depgraph::PosColumn;
use ces_core::model::{EmbeddingProvider, ModelConfig, PreparedExample};
use ces_core::pipeline::{index_parses, prepare_dataset};
use ces_core::rng::{stream, uniform};
use ces_core::synthetic::synthetic_corpus;
use ces_core::viterbi::Row;
use ces_core::RawExample;

/// Log-probability-like emission rows.
pub fn emissions(n: usize, seed: u64) -> Vec<Row> {
    let mut rng = stream(seed, "bench-emissions");
    (0..n)
        .map(|_| std::array::from_fn(|_| uniform(&mut rng, -6.0, 0.0)))
        .collect()
}

/// The synthetic corpus with hashed embeddings of width `config.d_bert`.
pub fn prepared(docs: usize, config: &ModelConfig) -> Vec<PreparedExample> {
    let docs = synthetic_corpus(docs, 7);
    let rows: Vec<RawExample> = docs.iter().map(|d| d.raw.clone()).collect();
    let parses = index_parses(docs.iter().map(|d| d.parse.clone()).collect(), &rows).expect("synthetic parses index");
    let tokens: HashMap<_, _> = docs.iter().map(|d| (d.raw.id.clone(), d.tokenized.clone())).collect();
    let provider = EmbeddingProvider::Hashed { dim: config.d_bert };
    prepare_dataset(&rows, Some(&tokens), &parses, &provider, config, PosColumn::Xpos)
        .unwrap_or_else(|e| panic!("synthetic corpus failed to prepare: {e:?}"))
}
