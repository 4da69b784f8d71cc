//! Cause-effect span detection over dependency-parsed text.
//!
//! Documents are labelled with BIO tags for cause and effect spans, tokens are
//! connected along dependency arcs, and a graph network over frozen subword
//! embeddings and POS features predicts tags, decoded with Viterbi.

pub mod corpus;
pub mod depgraph;
pub mod eval;
pub mod ndcore;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod synthetic;
pub mod viterbi;

pub use corpus::{LabelTag, LabeledExample, RawExample, SpanType, Word, NUM_TAGS};
pub use depgraph::{DepArc, EdgeDirection, TokenGraph};
pub use ndcore::{Tensor, TensorError};
pub use viterbi::TransitionModel;
