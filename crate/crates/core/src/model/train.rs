//! Training loop and inference over prepared examples.

use std::sync::Arc;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::{batch_loss, infer_logits, register, stack_inputs, ForwardInput};
use super::params::Params;
use super::ModelError;
use crate::corpus::{word_tags, LabelTag, LabeledExample, PosVocab};
use crate::depgraph::TokenGraph;
use crate::ndcore::{log_softmax_rows, AdamState, LrSchedule, Mode, Tape, Tensor};
use crate::rng::{shuffle, stream};
use crate::viterbi::{self, TransitionModel};

/// A labelled document with its token graph and embeddings, all truncated to
/// the same retained tokens.
#[derive(Clone, Debug)]
pub struct PreparedExample {
    pub example: LabeledExample,
    pub graph: TokenGraph,
    pub embeddings: Tensor<f32>,
}

impl PreparedExample {
    pub fn new(example: LabeledExample, graph: TokenGraph, embeddings: Tensor<f32>) -> Result<Self, ModelError> {
        let n = example.tokens.len();
        if graph.n_nodes != n || embeddings.rows() != n {
            return Err(ModelError::Input(format!(
                "example {:?}: {n} tokens, {} graph nodes, {} embedding rows",
                example.id,
                graph.n_nodes,
                embeddings.rows()
            )));
        }
        Ok(Self {
            example,
            graph,
            embeddings,
        })
    }

    /// Per-token POS tag, inherited from the token's word.
    pub fn token_pos(&self) -> impl Iterator<Item = Option<&str>> {
        self.example
            .token_to_word
            .iter()
            .map(|&w| self.example.words[w].pos.as_deref())
    }

    pub fn encode(&self, vocab: &PosVocab, config: &ModelConfig) -> ForwardInput<f32> {
        ForwardInput {
            embeddings: self.embeddings.clone(),
            pos: self.token_pos().map(|p| p.and_then(|p| vocab.index(p))).collect(),
            neighbors: Arc::new(self.graph.in_neighbors(config.edge_direction)),
        }
    }

    pub fn targets(&self) -> Vec<usize> {
        self.example.token_labels.iter().map(|t| t.index()).collect()
    }
}

/// POS vocabulary over training words, empty when POS features are off.
pub fn build_pos_vocab(examples: &[PreparedExample], config: &ModelConfig) -> Result<PosVocab, ModelError> {
    if !config.use_pos {
        return Ok(PosVocab::default());
    }
    let tags = examples
        .iter()
        .flat_map(|e| e.example.words.iter().filter_map(|w| w.pos.as_deref()));
    Ok(PosVocab::build(tags, config.d_pos)?)
}

/// Everything needed to predict.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub params: Params<f32>,
    pub pos_vocab: PosVocab,
    pub transitions: TransitionModel,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    /// Token-weighted mean loss of each epoch.
    pub loss_trace: Vec<f64>,
}

/// Transitions from gold word tags, rounded to `f32` so a saved checkpoint
/// decodes identically.
pub fn estimate_transitions(examples: &[PreparedExample]) -> Result<TransitionModel, ModelError> {
    let seqs: Vec<Vec<LabelTag>> = examples.iter().map(|e| e.example.gold_word_tags()).collect();
    let tm = TransitionModel::estimate(&seqs)?;
    Ok(quantize(&tm))
}

pub(crate) fn quantize(tm: &TransitionModel) -> TransitionModel {
    let q = |v: f64| v as f32 as f64;
    TransitionModel {
        log_start: tm.log_start.map(q),
        log_trans: tm.log_trans.map(|r| r.map(q)),
    }
}

/// Seeded training with per-epoch shuffling, gradient accumulation over
/// `batch_size` examples and one Adam step per batch under linear decay.
pub fn train(examples: &[PreparedExample], config: &ModelConfig, seed: u64) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(ModelError::Input("no training examples".into()));
    }
    let pos_vocab = build_pos_vocab(examples, config)?;
    let transitions = estimate_transitions(examples)?;
    let inputs: Vec<ForwardInput<f32>> = examples.iter().map(|e| e.encode(&pos_vocab, config)).collect();
    let targets: Vec<Vec<usize>> = examples.iter().map(PreparedExample::targets).collect();

    let mut params = Params::<f32>::init(config, seed);
    let mut adam = AdamState::with_betas(params.tensors(), config.beta1, config.beta2, config.adam_eps);
    let steps_per_epoch = examples.len().div_ceil(config.batch_size);
    let schedule = LrSchedule::new(config.base_lr, (config.epochs * steps_per_epoch) as u64);
    let mut shuffle_rng = stream(seed, "shuffle");
    let mut dropout_rng = stream(seed, "dropout");
    let mut grads: Vec<Tensor<f32>> = params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);
    info!(
        "training {} examples, {} parameters, {} epochs",
        examples.len(),
        params.parameter_count(),
        config.epochs
    );

    for epoch in 0..config.epochs {
        shuffle(&mut order, &mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0usize;
        for batch in order.chunks(config.batch_size) {
            let batch_tokens: usize = batch.iter().map(|&i| targets[i].len()).sum();
            if batch_tokens == 0 {
                continue;
            }
            let parts: Vec<&ForwardInput<f32>> = batch.iter().filter(|&&i| !targets[i].is_empty()).map(|&i| &inputs[i]).collect();
            let gold: Vec<usize> = batch.iter().flat_map(|&i| targets[i].iter().copied()).collect();
            let (stacked, lengths) = stack_inputs(&parts)?;
            let mut tape = Tape::new();
            let vars = register(&mut tape, &params);
            let loss = batch_loss(&mut tape, &vars, config, &stacked, &lengths, &gold, Mode::Train, &mut dropout_rng)?;
            let value = tape.value(loss).data()[0] as f64;
            if !value.is_finite() {
                let ids: Vec<&str> = batch.iter().map(|&i| examples[i].example.id.as_str()).collect();
                return Err(ModelError::NonFiniteLoss {
                    epoch,
                    id: ids.join(","),
                    value,
                });
            }
            epoch_loss += value * batch_tokens as f64;
            epoch_tokens += batch_tokens;
            let mut g = tape.backward(loss)?;
            let mut vi = 0;
            vars.visit(|_, v| {
                match g.take(*v) {
                    Some(gv) => grads[vi] = gv,
                    None => grads[vi].fill(0.0),
                }
                vi += 1;
            });
            let lr = schedule.lr(adam.step);
            let grad_refs: Vec<&Tensor<f32>> = grads.iter().collect();
            adam.step(&mut params.tensors_mut(), &grad_refs, lr)?;
        }
        let mean = if epoch_tokens > 0 { epoch_loss / epoch_tokens as f64 } else { 0.0 };
        debug!("epoch {} loss {:.6}", epoch + 1, mean);
        loss_trace.push(mean);
    }

    Ok(TrainOutcome {
        model: TrainedModel {
            config: config.clone(),
            params,
            pos_vocab,
            transitions,
        },
        loss_trace,
    })
}

/// How logits become tags.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeMode {
    /// Viterbi over first-token scores of each word.
    #[default]
    WordViterbi,
    /// Viterbi over every token, then lifted to words.
    TokenViterbi,
    /// Independent argmax per token, lifted to words.
    Argmax,
}

/// Per-example predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub token_tags: Vec<LabelTag>,
    pub word_tags: Vec<LabelTag>,
}

fn rows_of(logp: &Tensor<f32>, rows: impl IntoIterator<Item = usize>) -> Vec<viterbi::Row> {
    rows.into_iter()
        .map(|r| std::array::from_fn(|c| logp.get(r, c) as f64))
        .collect()
}

impl TrainedModel {
    pub fn logits(&self, example: &PreparedExample) -> Result<Tensor<f32>, ModelError> {
        infer_logits(&self.params, &self.config, &example.encode(&self.pos_vocab, &self.config))
    }

    pub fn predict(&self, example: &PreparedExample, mode: DecodeMode) -> Result<Prediction, ModelError> {
        let ex = &example.example;
        let logp = log_softmax_rows(&self.logits(example)?);
        let n = logp.rows();
        let token_tags = match mode {
            DecodeMode::Argmax => viterbi::argmax_tags(&rows_of(&logp, 0..n)),
            DecodeMode::TokenViterbi if n > 0 => viterbi::decode(&rows_of(&logp, 0..n), &self.transitions)?,
            DecodeMode::TokenViterbi => Vec::new(),
            DecodeMode::WordViterbi => {
                let firsts: Vec<usize> = ex.first_tokens().into_iter().flatten().collect();
                let words = if firsts.is_empty() {
                    Vec::new()
                } else {
                    viterbi::decode(&rows_of(&logp, firsts.iter().copied()), &self.transitions)?
                };
                // later pieces continue their word's span
                let mut tags = vec![LabelTag::Outside; n];
                let mut k = 0;
                for t in 0..n {
                    if firsts.get(k) == Some(&t) {
                        tags[t] = words[k];
                        k += 1;
                    } else if t > 0 {
                        tags[t] = tags[t - 1].demote();
                    }
                }
                tags
            }
        };
        let word_tags = word_tags(ex, &token_tags);
        Ok(Prediction {
            id: ex.id.clone(),
            token_tags,
            word_tags,
        })
    }
}

/// Fraction of retained tokens tagged as gold under `mode`.
pub fn token_accuracy(
    model: &TrainedModel,
    examples: &[PreparedExample],
    mode: DecodeMode,
) -> Result<f64, ModelError> {
    let (mut right, mut total) = (0usize, 0usize);
    for e in examples {
        let pred = model.predict(e, mode)?;
        right += pred.token_tags.iter().zip(&e.example.token_labels).filter(|(a, b)| a == b).count();
        total += pred.token_tags.len();
    }
    Ok(if total == 0 { 1.0 } else { right as f64 / total as f64 })
}
