//! train, predict and replay.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ces_core::eval::write_predictions;
use ces_core::model::{load_checkpoint, save_checkpoint, train, DecodeMode, ModelConfig, TrainedModel};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{sibling, write_atomic, write_json, Manifest};
use crate::{analysis, data, Invalid};

#[derive(Serialize)]
struct EpochLoss {
    epoch: usize,
    loss: f64,
}

pub fn run_train(run: &RunConfig) -> Result<()> {
    let checkpoint = run.require(&run.checkpoint, "checkpoint").map_err(Invalid)?;
    let loaded = data::load(run, &run.model)?;
    if loaded.examples.is_empty() {
        return Err(Invalid(anyhow::anyhow!("the dataset has no rows to train on")).into());
    }
    let outcome = train(&loaded.examples, &run.model, run.seed)?;
    write_atomic(checkpoint, |w| Ok(save_checkpoint(&outcome.model, w)?))?;
    let trace_path = sibling(checkpoint, ".loss.json");
    let trace: Vec<EpochLoss> = outcome
        .loss_trace
        .iter()
        .enumerate()
        .map(|(i, &loss)| EpochLoss { epoch: i + 1, loss })
        .collect();
    write_json(&trace_path, &trace)?;
    let inputs: Vec<&Path> = loaded.inputs.iter().map(PathBuf::as_path).collect();
    let manifest = Manifest::new("train", run, &inputs, &[checkpoint, &trace_path])?;
    manifest.write_next_to(checkpoint)?;
    if let Some(last) = outcome.loss_trace.last() {
        println!("trained {} examples for {} epochs, final loss {last:.6}", loaded.examples.len(), run.model.epochs);
    }
    println!("checkpoint: {}", checkpoint.display());
    Ok(())
}

/// The checkpoint's model. A run whose model settings differ from the
/// defaults must agree with the checkpoint's architecture.
pub fn load_model(run: &RunConfig) -> Result<TrainedModel> {
    let path = run.require(&run.checkpoint, "checkpoint").map_err(Invalid)?;
    run.check_inputs(&["checkpoint"]).map_err(Invalid)?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let expected = (run.model != ModelConfig::default()).then_some(&run.model);
    load_checkpoint(BufReader::new(file), expected)
        .with_context(|| format!("loading {}", path.display()))
        .map_err(|e| Invalid(e).into())
}

#[derive(Serialize)]
struct TagLine<'a> {
    id: &'a str,
    tokens: &'a [String],
    token_tags: Vec<&'static str>,
    word_tags: Vec<&'static str>,
}

pub fn run_predict(run: &RunConfig) -> Result<()> {
    let output = run.require(&run.output, "output").map_err(Invalid)?;
    let model = load_model(run)?;
    let mut loaded = data::load(run, &model.config)?;
    let tags_path = sibling(output, ".tags.jsonl");
    let mut predictions = Vec::with_capacity(loaded.examples.len());
    for e in &loaded.examples {
        predictions.push(model.predict(e, run.decode)?);
    }
    let delimiter = run.delimiter_byte()?;
    write_atomic(output, |w| Ok(write_predictions(w, &loaded.examples, &predictions, delimiter)?))?;
    write_atomic(&tags_path, |w| {
        for (e, p) in loaded.examples.iter().zip(&predictions) {
            let line = TagLine {
                id: &p.id,
                tokens: &e.example.tokens,
                token_tags: p.token_tags.iter().map(|t| t.as_str()).collect(),
                word_tags: p.word_tags.iter().map(|t| t.as_str()).collect(),
            };
            serde_json::to_writer(&mut *w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    if let Some(c) = &run.checkpoint {
        loaded.inputs.push(c.clone());
    }
    let inputs: Vec<&Path> = loaded.inputs.iter().map(PathBuf::as_path).collect();
    Manifest::new("predict", run, &inputs, &[output, &tags_path])?.write_next_to(output)?;
    println!("predicted {} examples ({:?} decoding)", predictions.len(), run.decode);
    Ok(())
}

pub fn predict_mode(run: &mut RunConfig, no_viterbi: bool) {
    if no_viterbi {
        run.decode = DecodeMode::Argmax;
    }
}

/// Reruns a manifest's command and compares the new outputs with the
/// recorded hashes.
pub fn run_replay(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .with_context(|| format!("parsing manifest {}", path.display()))
        .map_err(Invalid)?;
    for input in &manifest.inputs {
        let now = crate::output::sha256_file(&input.path).with_context(|| format!("hashing {}", input.path.display()))?;
        if now != input.sha256 {
            return Err(Invalid(anyhow::anyhow!("input {} changed since the recorded run", input.path.display())).into());
        }
    }
    match manifest.command.as_str() {
        "train" => run_train(&manifest.run)?,
        "predict" => run_predict(&manifest.run)?,
        "cv" => analysis::run_cv_command(&manifest.run)?,
        other => return Err(Invalid(anyhow::anyhow!("cannot replay command {other:?}")).into()),
    }
    let mut differing = Vec::new();
    for out in &manifest.outputs {
        let now = crate::output::sha256_file(&out.path)?;
        if now != out.sha256 {
            differing.push(out.path.display().to_string());
        }
    }
    if !differing.is_empty() {
        bail!("replayed outputs differ from the manifest: {}", differing.join(", "));
    }
    println!("replay reproduced {} outputs", manifest.outputs.len());
    Ok(())
}
