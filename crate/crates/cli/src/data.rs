//! Loading task rows, parses, tokenizations and embeddings into examples.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ces_core::corpus::{read_dataset_file, read_tokenization, RawExample};
use ces_core::depgraph::parse_conllu;
use ces_core::model::{EmbeddingProvider, EmbeddingStore, ModelConfig, PreparedExample};
use ces_core::pipeline::{index_parses, prepare_dataset};

use crate::config::RunConfig;
use crate::Invalid;

pub struct Loaded {
    pub examples: Vec<PreparedExample>,
    /// Files read, for the manifest.
    pub inputs: Vec<std::path::PathBuf>,
}

pub fn provider(run: &RunConfig, model: &ModelConfig) -> Result<EmbeddingProvider> {
    match &run.embeddings {
        Some(path) => {
            let store = EmbeddingStore::read_file(path).with_context(|| format!("reading {}", path.display()))?;
            if store.dim() != model.d_bert {
                bail!(
                    "embedding file {} has width {} but d_bert is {}",
                    path.display(),
                    store.dim(),
                    model.d_bert
                );
            }
            Ok(EmbeddingProvider::File(store))
        }
        None => {
            log::warn!("no embedding file given; using hashed pseudo-embeddings of width {}", model.d_bert);
            Ok(EmbeddingProvider::Hashed { dim: model.d_bert })
        }
    }
}

pub fn read_rows(path: &Path, delimiter: u8) -> Result<Vec<RawExample>> {
    read_dataset_file(path, delimiter).with_context(|| format!("reading {}", path.display()))
}

/// Every row prepared for the model. Input problems are reported together
/// as a validation failure.
pub fn load(run: &RunConfig, model: &ModelConfig) -> Result<Loaded> {
    run.check_inputs(&["dataset", "conllu", "tokenization", "embeddings"]).map_err(Invalid)?;
    let dataset = run.require(&run.dataset, "dataset").map_err(Invalid)?;
    let rows = read_rows(dataset, run.delimiter_byte()?).map_err(Invalid)?;
    let mut inputs = vec![dataset.to_owned()];
    if rows.is_empty() {
        return Ok(Loaded {
            examples: Vec::new(),
            inputs,
        });
    }
    let conllu = run.require(&run.conllu, "conllu").map_err(Invalid)?;
    let file = File::open(conllu).with_context(|| format!("opening {}", conllu.display()))?;
    let docs = parse_conllu(BufReader::new(file), run.doc_grouping)
        .with_context(|| format!("reading {}", conllu.display()))
        .map_err(Invalid)?;
    inputs.push(conllu.to_owned());
    let parses = index_parses(docs, &rows).map_err(|e| Invalid(e.into()))?;
    let tokenization = match &run.tokenization {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            inputs.push(path.clone());
            Some(
                read_tokenization(BufReader::new(file))
                    .with_context(|| format!("reading {}", path.display()))
                    .map_err(Invalid)?,
            )
        }
        None => None,
    };
    let provider = provider(run, model).map_err(Invalid)?;
    if let Some(p) = &run.embeddings {
        inputs.push(p.clone());
    }
    let examples = prepare_dataset(&rows, tokenization.as_ref(), &parses, &provider, model, run.pos_column)
        .map_err(|errors| {
            let list: Vec<String> = errors.iter().map(ToString::to_string).collect();
            Invalid(anyhow::anyhow!("{} rows failed validation:\n{}", list.len(), list.join("\n")))
        })?;
    let truncated = examples.iter().filter(|e| e.example.is_truncated()).count();
    if truncated > 0 {
        log::warn!("{truncated} examples truncated to {} tokens", model.max_seq_len);
    }
    Ok(Loaded {
        examples,
        inputs,
    })
}
