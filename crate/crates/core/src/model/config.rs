use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::corpus::NUM_TAGS;
use crate::depgraph::EdgeDirection;

/// What the graph layers see at each node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeFeatures {
    /// The concatenated embedding and POS features.
    #[default]
    Full,
    /// A single constant `1` per node.
    ConstantOne,
}

/// Where dropout is applied during training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropoutPlacement {
    /// Contextual embeddings only.
    #[default]
    Embeddings,
    /// Embeddings plus every graph and recurrent layer output.
    All,
}

/// Dimensions, hyperparameters and ablation switches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_bert: usize,
    pub d_pos: usize,
    pub gnn_hidden: usize,
    pub d_gnn: usize,
    pub bilstm_out: usize,
    pub num_classes: usize,
    pub dropout: f64,
    pub dropout_placement: DropoutPlacement,
    pub max_seq_len: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub base_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub use_pos: bool,
    pub use_gnn: bool,
    pub use_bilstm: bool,
    pub node_features: NodeFeatures,
    pub edge_direction: EdgeDirection,
    /// Trainable square map on the embeddings, initialized to the identity.
    pub use_projection: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_bert: 768,
            d_pos: 51,
            gnn_hidden: 1024,
            d_gnn: 512,
            bilstm_out: 512,
            num_classes: NUM_TAGS,
            dropout: 0.1,
            dropout_placement: DropoutPlacement::Embeddings,
            max_seq_len: 350,
            batch_size: 4,
            epochs: 10,
            base_lr: 2e-5,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            use_pos: true,
            use_gnn: true,
            use_bilstm: true,
            node_features: NodeFeatures::Full,
            edge_direction: EdgeDirection::HeadToTail,
            use_projection: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: String| Err(ModelError::Config(m));
        if self.num_classes != NUM_TAGS {
            return fail(format!("num_classes must be {NUM_TAGS}, got {}", self.num_classes));
        }
        if self.bilstm_out % 2 != 0 {
            return fail(format!("bilstm_out must be even, got {}", self.bilstm_out));
        }
        for (name, v) in [
            ("d_bert", self.d_bert),
            ("max_seq_len", self.max_seq_len),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if self.use_pos && self.d_pos == 0 {
            return fail("d_pos must be positive when POS features are on".into());
        }
        if self.use_gnn {
            for (name, v) in [
                ("gnn_hidden", self.gnn_hidden),
                ("d_gnn", self.d_gnn),
                ("bilstm_out", if self.use_bilstm { self.bilstm_out } else { 1 }),
            ] {
                if v == 0 {
                    return fail(format!("{name} must be positive"));
                }
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !(self.base_lr >= 0.0 && self.base_lr.is_finite()) {
            return fail(format!("base_lr must be finite and non-negative, got {}", self.base_lr));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return fail(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return fail("adam_eps must be positive".into());
        }
        Ok(())
    }

    pub fn bilstm_hidden(&self) -> usize {
        self.bilstm_out / 2
    }

    /// Width of the graph branch output, zero when the branch is off.
    pub fn d_gnn_effective(&self) -> usize {
        match (self.use_gnn, self.use_bilstm) {
            (false, _) => 0,
            (true, true) => self.bilstm_out,
            (true, false) => self.d_gnn,
        }
    }

    /// Width of the embedding plus POS concatenation.
    pub fn token_feature_dim(&self) -> usize {
        self.d_bert + if self.use_pos { self.d_pos } else { 0 }
    }

    pub fn gnn_input_dim(&self) -> usize {
        match self.node_features {
            NodeFeatures::Full => self.token_feature_dim(),
            NodeFeatures::ConstantOne => 1,
        }
    }

    pub fn head_input_dim(&self) -> usize {
        self.token_feature_dim() + self.d_gnn_effective()
    }

    /// Fields that determine parameter shapes and the forward computation.
    pub fn architecture_matches(&self, other: &ModelConfig) -> bool {
        self.d_bert == other.d_bert
            && self.d_pos == other.d_pos
            && self.gnn_hidden == other.gnn_hidden
            && self.d_gnn == other.d_gnn
            && self.bilstm_out == other.bilstm_out
            && self.num_classes == other.num_classes
            && self.use_pos == other.use_pos
            && self.use_gnn == other.use_gnn
            && self.use_bilstm == other.use_bilstm
            && self.node_features == other.node_features
            && self.edge_direction == other.edge_direction
            && self.use_projection == other.use_projection
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        ablation.apply(&mut self);
        self
    }
}

/// The six rows of the ablation grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    Baseline,
    NodeBilstm,
    Pos,
    PosNode,
    PosBilstm,
    Proposed,
}

impl Ablation {
    pub const ALL: [Ablation; 6] = [
        Ablation::Baseline,
        Ablation::NodeBilstm,
        Ablation::Pos,
        Ablation::PosNode,
        Ablation::PosBilstm,
        Ablation::Proposed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Baseline => "baseline",
            Ablation::NodeBilstm => "node-bilstm",
            Ablation::Pos => "pos",
            Ablation::PosNode => "pos-node",
            Ablation::PosBilstm => "pos-bilstm",
            Ablation::Proposed => "proposed",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Ablation::Baseline => "Baseline",
            Ablation::NodeBilstm => "+ Node features, BiLSTM",
            Ablation::Pos => "Baseline w/ POS",
            Ablation::PosNode => "w/ POS + Node features",
            Ablation::PosBilstm => "w/ POS + BiLSTM",
            Ablation::Proposed => "w/ POS + Node features, BiLSTM (Proposed)",
        }
    }

    pub fn apply(self, c: &mut ModelConfig) {
        let (pos, gnn, nodes, bilstm) = match self {
            Ablation::Baseline => (false, false, NodeFeatures::Full, false),
            Ablation::NodeBilstm => (false, true, NodeFeatures::Full, true),
            Ablation::Pos => (true, false, NodeFeatures::Full, false),
            Ablation::PosNode => (true, true, NodeFeatures::Full, false),
            Ablation::PosBilstm => (true, true, NodeFeatures::ConstantOne, true),
            Ablation::Proposed => (true, true, NodeFeatures::Full, true),
        };
        c.use_pos = pos;
        c.use_gnn = gnn;
        c.node_features = nodes;
        c.use_bilstm = bilstm;
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| ModelError::Config(format!("unknown ablation {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!(c.token_feature_dim(), 819);
        assert_eq!(c.head_input_dim(), 1331);
        assert_eq!(c.bilstm_hidden(), 256);
        assert_eq!((c.batch_size, c.epochs, c.max_seq_len), (4, 10, 350));
        assert_eq!(c.base_lr, 2e-5);
    }

    #[test]
    fn ablation_dims() {
        let d = |a| ModelConfig::default().with_ablation(a).head_input_dim();
        assert_eq!(d(Ablation::Baseline), 768);
        assert_eq!(d(Ablation::Pos), 819);
        assert_eq!(d(Ablation::NodeBilstm), 768 + 512);
        assert_eq!(d(Ablation::PosNode), 819 + 512);
        let c = ModelConfig::default().with_ablation(Ablation::PosBilstm);
        assert_eq!(c.gnn_input_dim(), 1);
        assert_eq!("pos-node".parse::<Ablation>().unwrap(), Ablation::PosNode);
        assert!("nope".parse::<Ablation>().is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = |f: fn(&mut ModelConfig)| {
            let mut c = ModelConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.bilstm_out = 511));
        assert!(bad(|c| c.num_classes = 3));
        assert!(bad(|c| c.dropout = 1.0));
        assert!(bad(|c| c.batch_size = 0));
        assert!(bad(|c| c.base_lr = f64::NAN));
    }

    #[test]
    fn unknown_json_keys_rejected() {
        let ok: ModelConfig = serde_json::from_str(r#"{"epochs": 3}"#).unwrap();
        assert_eq!(ok.epochs, 3);
        assert_eq!(ok.d_bert, 768);
        assert!(serde_json::from_str::<ModelConfig>(r#"{"epoch": 3}"#).is_err());
    }
}
