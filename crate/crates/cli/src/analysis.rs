//! eval, cv, gradcheck, graph-stats and synth.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ces_core::corpus::{write_dataset, write_tokenization, RawExample};
use ces_core::depgraph::{edge_agreement, write_conllu};
use ces_core::eval::{
    format_table, mean_report, paired_ttest, run_cv, score_rows, CvOptions, FoldReport, MetricsReport, Significance,
    TTestResult, WeightedScorer,
};
use ces_core::model::{random_case, tiny_config, Ablation, ModelConfig};
use ces_core::ndcore::DEFAULT_TOLERANCE;
use ces_core::synthetic::synthetic_corpus;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{write_atomic, write_json, Manifest};
use crate::{data, Invalid};

pub fn run_eval(gold: &Path, pred: &Path, delimiter: u8, output: Option<&Path>) -> Result<()> {
    let gold_rows = data::read_rows(gold, delimiter).map_err(Invalid)?;
    let pred_rows = data::read_rows(pred, delimiter).map_err(Invalid)?;
    let report = score_rows(&gold_rows, &pred_rows, &WeightedScorer).map_err(|e| Invalid(e.into()))?;
    print!("{}", format_table(&[("predictions".into(), report.clone())], None));
    if let Some(path) = output {
        write_json(path, &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct VariantResult {
    variant: Ablation,
    reports: Vec<FoldReport>,
    mean: MetricsReport,
}

#[derive(Serialize)]
struct Comparison {
    variant: Ablation,
    against: Ablation,
    precision: TTestResult,
    recall: TTestResult,
    f1: TTestResult,
    exact_match: TTestResult,
}

#[derive(Serialize)]
struct CvOutput {
    variants: Vec<VariantResult>,
    comparisons: Vec<Comparison>,
}

fn compare(a: &VariantResult, b: &VariantResult) -> Result<Comparison> {
    let col = |r: &VariantResult, f: fn(&MetricsReport) -> f64| r.reports.iter().map(|x| f(&x.metrics)).collect::<Vec<_>>();
    let test = |f: fn(&MetricsReport) -> f64| paired_ttest(&col(a, f), &col(b, f));
    Ok(Comparison {
        variant: b.variant,
        against: a.variant,
        precision: test(|m| m.precision)?,
        recall: test(|m| m.recall)?,
        f1: test(|m| m.f1)?,
        exact_match: test(|m| m.exact_match)?,
    })
}

pub fn run_cv_command(run: &RunConfig) -> Result<()> {
    if run.cv.variants.is_empty() {
        return Err(Invalid(anyhow::anyhow!("no variants to cross-validate")).into());
    }
    let loaded = data::load(run, &run.model)?;
    if loaded.examples.len() < run.cv.folds {
        return Err(Invalid(anyhow::anyhow!(
            "{} examples cannot fill {} folds",
            loaded.examples.len(),
            run.cv.folds
        ))
        .into());
    }
    let options = CvOptions {
        seeds: run.cv.seeds.clone(),
        folds: run.cv.folds,
        decode: run.decode,
        jobs: run.cv.jobs.max(1),
    };
    let mut variants = Vec::new();
    for &variant in &run.cv.variants {
        let config = run.model.clone().with_ablation(variant);
        let reports = run_cv(&loaded.examples, &config, &options, &WeightedScorer)?;
        let metrics: Vec<MetricsReport> = reports.iter().map(|r| r.metrics.clone()).collect();
        let mean = mean_report(&metrics).context("no folds were run")?;
        variants.push(VariantResult { variant, reports, mean });
    }
    let mut comparisons = Vec::new();
    if run.cv.seeds.len() * run.cv.folds >= 2 {
        for other in &variants[1..] {
            comparisons.push(compare(&variants[0], other)?);
        }
    }
    let rows: Vec<(String, MetricsReport)> = variants.iter().map(|v| (v.variant.to_string(), v.mean.clone())).collect();
    let marks: Vec<&str> = std::iter::once("")
        .chain(comparisons.iter().map(|c| c.f1.level.map_or("", Significance::marker)))
        .collect();
    print!("{}", format_table(&rows, Some(&marks)));
    if !comparisons.is_empty() {
        println!("F1 markers against {}: *** p<0.05, ** p<0.10, * p<0.15, ^ p<0.20", variants[0].variant);
    }
    if let Some(path) = &run.output {
        let out = CvOutput { variants, comparisons };
        write_json(path, &out)?;
        let inputs: Vec<&Path> = loaded.inputs.iter().map(PathBuf::as_path).collect();
        Manifest::new("cv", run, &inputs, &[path])?.write_next_to(path)?;
    }
    Ok(())
}

/// `d_bert,gnn_hidden,d_gnn`.
pub fn parse_dims(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad --dims {s:?}"))?;
    match parts[..] {
        [a, b, c] if a > 0 && b > 0 && c > 0 => Ok((a, b, c)),
        _ => bail!("--dims takes three positive sizes, got {s:?}"),
    }
}

pub struct GradcheckOptions {
    pub instances: usize,
    pub dims: Vec<(usize, usize, usize)>,
    pub ablations: Vec<Ablation>,
    pub max_tokens: usize,
    pub seed: u64,
    pub corrupt: bool,
}

pub fn run_gradcheck(o: &GradcheckOptions) -> Result<()> {
    let mut worst: f64 = 0.0;
    let mut failed = 0;
    let mut total = 0;
    for &(d_bert, hidden, d_gnn) in &o.dims {
        for &ablation in &o.ablations {
            let config: ModelConfig = tiny_config(d_bert, hidden, d_gnn).with_ablation(ablation);
            for i in 0..o.instances {
                let case = random_case(&config, o.seed.wrapping_add(i as u64), o.max_tokens);
                let report = case.check(o.corrupt)?;
                let ok = report.passed(DEFAULT_TOLERANCE);
                println!(
                    "{ablation} dims {d_bert},{hidden},{d_gnn} instance {i}: {} tokens, {} entries, max rel error {:.3e} {}",
                    case.input.len(),
                    report.checked,
                    report.max_rel_error,
                    if ok { "ok" } else { "FAIL" }
                );
                worst = worst.max(report.max_rel_error);
                failed += usize::from(!ok);
                total += 1;
            }
        }
    }
    println!("{total} instances, worst relative error {worst:.3e}, tolerance {DEFAULT_TOLERANCE:e}");
    if failed > 0 {
        bail!("{failed} of {total} gradient checks exceeded the tolerance");
    }
    Ok(())
}

#[derive(Serialize)]
struct DocGraphStats {
    id: String,
    tokens: usize,
    edges: usize,
    components: usize,
    same_label_edges: usize,
    homophily: Option<f64>,
}

#[derive(Serialize)]
struct GraphStats {
    documents: usize,
    tokens: usize,
    edges: usize,
    same_label_edges: usize,
    /// Same-label share over all edges of all documents.
    homophily: Option<f64>,
    /// Mean of the per-document shares, over documents with edges.
    mean_document_homophily: Option<f64>,
    per_document: Vec<DocGraphStats>,
}

pub fn run_graph_stats(run: &RunConfig) -> Result<()> {
    // graphs and labels only, so skip real embeddings
    let mut light = run.clone();
    light.embeddings = None;
    light.model = ModelConfig {
        d_bert: 1,
        ..run.model.clone()
    };
    let loaded = data::load(&light, &light.model)?;
    let mut per_document = Vec::new();
    for e in &loaded.examples {
        let labels: Vec<_> = e.example.token_labels.iter().map(|t| t.collapse()).collect();
        let agree = edge_agreement(&e.graph, &labels)?;
        per_document.push(DocGraphStats {
            id: e.example.id.clone(),
            tokens: e.graph.n_nodes,
            edges: agree.total,
            components: e.graph.weak_components(),
            same_label_edges: agree.same,
            homophily: (agree.total > 0).then(|| agree.same as f64 / agree.total as f64),
        });
    }
    let edges: usize = per_document.iter().map(|d| d.edges).sum();
    let same: usize = per_document.iter().map(|d| d.same_label_edges).sum();
    let shares: Vec<f64> = per_document.iter().filter_map(|d| d.homophily).collect();
    let stats = GraphStats {
        documents: per_document.len(),
        tokens: per_document.iter().map(|d| d.tokens).sum(),
        edges,
        same_label_edges: same,
        homophily: (edges > 0).then(|| same as f64 / edges as f64),
        mean_document_homophily: (!shares.is_empty()).then(|| shares.iter().sum::<f64>() / shares.len() as f64),
        per_document,
    };
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.4}"));
    println!(
        "{} documents, {} tokens, {} edges, homophily {} (document mean {})",
        stats.documents,
        stats.tokens,
        stats.edges,
        fmt(stats.homophily),
        fmt(stats.mean_document_homophily)
    );
    if let Some(path) = &run.output {
        write_json(path, &stats)?;
    }
    Ok(())
}

/// Writes `dataset.csv`, `parses.conllu` and `tokens.jsonl` for a generated
/// corpus.
pub fn run_synth(count: usize, seed: u64, out_dir: &Path, delimiter: u8) -> Result<()> {
    let docs = synthetic_corpus(count, seed);
    let rows: Vec<RawExample> = docs.iter().map(|d| d.raw.clone()).collect();
    write_atomic(&out_dir.join("dataset.csv"), |w| Ok(write_dataset(w, &rows, delimiter)?))?;
    let parses: Vec<_> = docs.iter().map(|d| d.parse.clone()).collect();
    write_atomic(&out_dir.join("parses.conllu"), |w| Ok(w.write_all(write_conllu(&parses).as_bytes())?))?;
    write_atomic(&out_dir.join("tokens.jsonl"), |w| {
        Ok(write_tokenization(w, docs.iter().map(|d| &d.tokenized))?)
    })?;
    println!("wrote {count} documents to {}", out_dir.display());
    Ok(())
}
