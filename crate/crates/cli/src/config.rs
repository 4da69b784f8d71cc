//! Run configuration: built-in defaults, then a JSON file, then flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ces_core::depgraph::{DocGrouping, PosColumn};
use ces_core::eval::{CV_FOLDS, CV_SEEDS};
use ces_core::model::{Ablation, DecodeMode, ModelConfig};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const DEFAULT_SEED: u64 = 123;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSettings {
    pub seeds: Vec<u64>,
    pub folds: usize,
    /// The first variant is compared against every other one.
    pub variants: Vec<Ablation>,
    pub jobs: usize,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            seeds: CV_SEEDS.to_vec(),
            folds: CV_FOLDS,
            variants: vec![Ablation::Proposed],
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub conllu: Option<PathBuf>,
    pub tokenization: Option<PathBuf>,
    /// Absent means hashed pseudo-embeddings of width `model.d_bert`.
    pub embeddings: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub delimiter: char,
    pub pos_column: PosColumn,
    pub doc_grouping: DocGrouping,
    pub ablation: Option<Ablation>,
    pub decode: DecodeMode,
    pub model: ModelConfig,
    pub cv: CvSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            conllu: None,
            tokenization: None,
            embeddings: None,
            checkpoint: None,
            output: None,
            seed: DEFAULT_SEED,
            delimiter: ';',
            pos_column: PosColumn::default(),
            doc_grouping: DocGrouping::default(),
            ablation: None,
            decode: DecodeMode::default(),
            model: ModelConfig::default(),
            cv: CvSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter).map_err(|_| anyhow::anyhow!("delimiter {:?} is not a single byte", self.delimiter))
    }

    pub fn require<'a>(&self, field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        field.as_deref().with_context(|| format!("missing required setting `{name}`"))
    }

    /// Every configured input that must already exist.
    pub fn check_inputs(&self, names: &[&str]) -> Result<()> {
        let mut missing = Vec::new();
        for &name in names {
            let field = match name {
                "dataset" => &self.dataset,
                "conllu" => &self.conllu,
                "tokenization" => &self.tokenization,
                "embeddings" => &self.embeddings,
                "checkpoint" => &self.checkpoint,
                other => unreachable!("unknown input {other}"),
            };
            if let Some(p) = field {
                if !p.is_file() {
                    missing.push(format!("{name}: {} does not exist", p.display()));
                }
            }
        }
        if !missing.is_empty() {
            bail!("{}", missing.join("\n"));
        }
        Ok(())
    }
}

/// Settings shared by the data-driven commands. Every flag mirrors a config
/// key; model keys live under `model` in the file.
#[derive(Args, Clone, Debug, Default, Serialize)]
pub struct CommonFlags {
    /// JSON config file (or a run manifest) layered over the defaults.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Task file with Index, Text and optionally Cause and Effect columns.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// Dependency parses in CoNLL-U.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conllu: Option<PathBuf>,
    /// Subword tokenization JSONL; words come from the parse without it.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tokenization: Option<PathBuf>,
    /// Embedding file; hashed pseudo-embeddings without it.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delimiter: Option<char>,
    /// upos or xpos.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pos_column: Option<String>,
    /// doc-id-comment or whole-file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doc_grouping: Option<String>,
    /// baseline, node-bilstm, pos, pos-node, pos-bilstm or proposed.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ablation: Option<String>,
    /// word-viterbi, token-viterbi or argmax.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decode: Option<String>,
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelFlags,
}

#[derive(Args, Clone, Debug, Default, Serialize)]
pub struct ModelFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_bert: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_pos: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gnn_hidden: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_gnn: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bilstm_out: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout: Option<f64>,
    /// embeddings or all.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout_placement: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_seq_len: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adam_eps: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub use_pos: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub use_gnn: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub use_bilstm: Option<bool>,
    /// full or constant-one.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_features: Option<String>,
    /// head-to-tail, tail-to-head or symmetric.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge_direction: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub use_projection: Option<bool>,
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (_, Value::Null) => {}
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ if v.is_null() => {}
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// The config file's settings; a manifest contributes its `run` object.
pub fn read_config_file(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    match value {
        Value::Object(mut map) if map.contains_key("run") && map.contains_key("command") => {
            Ok(map.remove("run").unwrap_or(Value::Object(Map::new())))
        }
        Value::Object(_) => Ok(value),
        _ => bail!("config {} must be a JSON object", path.display()),
    }
}

/// Defaults, then the config file, then flags. An ablation switches the
/// architecture flags of the model; explicit model flags still win.
pub fn resolve(flags: &CommonFlags, extra: Value) -> Result<RunConfig> {
    let mut value = serde_json::to_value(RunConfig::default())?;
    if let Some(path) = &flags.config {
        merge(&mut value, read_config_file(path)?);
    }
    merge(&mut value, serde_json::to_value(flags)?);
    merge(&mut value, extra);
    let model_flags = serde_json::to_value(&flags.model)?;
    merge(&mut value, serde_json::json!({ "model": model_flags.clone() }));
    let mut run: RunConfig = serde_json::from_value(value).context("invalid configuration")?;
    if let Some(a) = run.ablation {
        run.model = run.model.with_ablation(a);
        let mut model = serde_json::to_value(&run.model)?;
        merge(&mut model, model_flags);
        run.model = serde_json::from_value(model).context("invalid model configuration")?;
    }
    run.model.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    run.delimiter_byte()?;
    Ok(run)
}
