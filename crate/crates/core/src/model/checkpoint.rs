//! `CEMD` checkpoint files: header, JSON metadata, named `f32` tensors.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::Params;
use super::train::TrainedModel;
use super::ModelError;
use crate::corpus::{PosVocab, NUM_TAGS};
use crate::ndcore::Tensor;
use crate::viterbi::TransitionModel;

pub const CEMD_MAGIC: &[u8; 4] = b"CEMD";
pub const CEMD_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Metadata {
    config: ModelConfig,
    pos_tags: Vec<String>,
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

fn put_u32(w: &mut impl Write, v: usize) -> Result<(), ModelError> {
    let v = u32::try_from(v).map_err(|_| bad(format!("{v} does not fit in u32")))?;
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_tensor(w: &mut impl Write, name: &str, t: &Tensor<f32>) -> Result<(), ModelError> {
    put_u32(w, name.len())?;
    w.write_all(name.as_bytes())?;
    put_u32(w, t.shape().len())?;
    for &d in t.shape() {
        put_u32(w, d)?;
    }
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn save_checkpoint(model: &TrainedModel, mut sink: impl Write) -> Result<(), ModelError> {
    let meta = serde_json::to_vec(&Metadata {
        config: model.config.clone(),
        pos_tags: model.pos_vocab.tags().to_vec(),
    })
    .map_err(|e| bad(e.to_string()))?;
    sink.write_all(CEMD_MAGIC)?;
    put_u32(&mut sink, CEMD_VERSION as usize)?;
    put_u32(&mut sink, model.config.head_input_dim())?;
    put_u32(&mut sink, meta.len())?;
    sink.write_all(&meta)?;

    let mut named: Vec<(String, Tensor<f32>)> = Vec::new();
    model.params.visit(|n, t| named.push((n.to_owned(), t.clone())));
    let tm = &model.transitions;
    let start = tm.log_start.iter().map(|&v| v as f32).collect();
    let trans = tm.log_trans.iter().flatten().map(|&v| v as f32).collect();
    named.push(("viterbi.start".into(), Tensor::new(vec![NUM_TAGS], start)?));
    named.push(("viterbi.transitions".into(), Tensor::new(vec![NUM_TAGS, NUM_TAGS], trans)?));

    put_u32(&mut sink, named.len())?;
    for (n, t) in &named {
        put_tensor(&mut sink, n, t)?;
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize, what: &str) -> Result<Vec<u8>, ModelError> {
        let mut buf = Vec::new();
        (&mut self.inner).take(n as u64).read_to_end(&mut buf)?;
        if buf.len() != n {
            return Err(bad(format!("file ends early while reading {what}")));
        }
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<usize, ModelError> {
        let b = self.bytes(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self, what: &str) -> Result<String, ModelError> {
        let n = self.u32(what)?;
        String::from_utf8(self.bytes(n, what)?).map_err(|_| bad(format!("invalid UTF-8 in {what}")))
    }

    fn tensor(&mut self) -> Result<(String, Tensor<f32>), ModelError> {
        let name = self.string("tensor name")?;
        let rank = self.u32("tensor rank")?;
        if rank > 4 {
            return Err(bad(format!("tensor {name:?} has rank {rank}")));
        }
        let shape = (0..rank).map(|_| self.u32("tensor shape")).collect::<Result<Vec<_>, _>>()?;
        let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let len = len.ok_or_else(|| bad(format!("tensor {name:?} is too large")))?;
        let raw = self.bytes(len * 4, "tensor data")?;
        let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        Ok((name, Tensor::new(shape, data)?))
    }
}

/// Reads a checkpoint. With `expected`, the stored architecture must match it.
pub fn load_checkpoint(source: impl Read, expected: Option<&ModelConfig>) -> Result<TrainedModel, ModelError> {
    let mut r = Reader { inner: source };
    let magic = r.bytes(4, "magic")?;
    if magic != CEMD_MAGIC {
        return Err(bad(format!("not a checkpoint (magic {magic:?})")));
    }
    let version = r.u32("version")?;
    if version != CEMD_VERSION as usize {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let head_dim = r.u32("head dimension")?;
    let meta_len = r.u32("metadata length")?;
    let meta: Metadata =
        serde_json::from_slice(&r.bytes(meta_len, "metadata")?).map_err(|e| bad(format!("metadata: {e}")))?;
    let config = meta.config;
    config.validate()?;
    if head_dim != config.head_input_dim() {
        return Err(bad(format!(
            "header records head input {head_dim}, configuration implies {}",
            config.head_input_dim()
        )));
    }
    if let Some(want) = expected {
        if !want.architecture_matches(&config) {
            return Err(bad("checkpoint architecture does not match the requested configuration"));
        }
    }

    let template = Params::<f32>::init(&config, 0);
    let names = template.names();
    let count = r.u32("tensor count")?;
    if count != names.len() + 2 {
        return Err(bad(format!("expected {} tensors, found {count}", names.len() + 2)));
    }
    let shapes: Vec<Vec<usize>> = template.tensors().iter().map(|t| t.shape().to_vec()).collect();
    let mut values = Vec::with_capacity(names.len());
    for (want, shape) in names.iter().zip(&shapes) {
        let (name, t) = r.tensor()?;
        if &name != want || t.shape() != shape.as_slice() {
            return Err(bad(format!(
                "tensor {name:?} {:?} where {want:?} {shape:?} was expected",
                t.shape()
            )));
        }
        values.push(t);
    }
    let params = template.replaced(&values);

    let mut tail = |want: &str, shape: &[usize]| -> Result<Vec<f64>, ModelError> {
        let (name, t) = r.tensor()?;
        if name != want || t.shape() != shape {
            return Err(bad(format!("expected tensor {want:?}, found {name:?}")));
        }
        Ok(t.data().iter().map(|&v| v as f64).collect())
    };
    let start = tail("viterbi.start", &[NUM_TAGS])?;
    let trans = tail("viterbi.transitions", &[NUM_TAGS, NUM_TAGS])?;
    let transitions = TransitionModel::from_scores(
        std::array::from_fn(|i| start[i]),
        std::array::from_fn(|i| std::array::from_fn(|j| trans[i * NUM_TAGS + j])),
    );
    let mut probe = [0u8; 1];
    if r.inner.read(&mut probe)? != 0 {
        return Err(bad("trailing bytes after the last tensor"));
    }

    let pos_vocab = PosVocab::from_tags(meta.pos_tags, config.d_pos.max(1))?;
    Ok(TrainedModel {
        config,
        params,
        pos_vocab,
        transitions,
    })
}
