//! The span-tagging network: frozen embeddings, optional POS one-hots, two
//! graph layers and a BiLSTM over the dependency graph, and a linear head.

mod checkpoint;
mod config;
mod embeddings;
mod gradcheck;
mod network;
mod params;
mod train;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, CEMD_MAGIC, CEMD_VERSION};
pub use config::{Ablation, DropoutPlacement, ModelConfig, NodeFeatures};
pub use embeddings::{
    hashed_vector, verify_alignment, EmbeddingError, EmbeddingProvider, EmbeddingRecord, EmbeddingStore,
    CEEM_MAGIC, CEEM_VERSION,
};
pub use gradcheck::{random_case, tiny_config, GradCheckCase};
pub use network::{
    batch_loss, bilstm, example_loss, forward, forward_batch, infer_logits, pos_onehot, register, sage_layer, stack_inputs,
    ForwardInput,
};
pub use params::{BiLstmParams, HeadParams, LstmParams, ModelParams, Params, SageParams};
pub use train::{
    build_pos_vocab, estimate_transitions, token_accuracy, train, DecodeMode, Prediction, PreparedExample,
    TrainOutcome, TrainedModel,
};

use crate::corpus::CorpusError;
use crate::ndcore::TensorError;
use crate::viterbi::ViterbiError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("non-finite loss {value} in epoch {epoch} on example {id:?}")]
    NonFiniteLoss { epoch: usize, id: String, value: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Viterbi(#[from] ViterbiError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
