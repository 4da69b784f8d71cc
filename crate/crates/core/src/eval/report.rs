//! Score tables and submission-style prediction files.

use std::io::Write;

use super::metrics::MetricsReport;
use super::EvalError;
use crate::corpus::{decode_spans, write_dataset, RawExample};
use crate::model::{Prediction, PreparedExample};

/// Aligned text table with one row per labelled report, scores in percent to
/// two decimals. `markers` optionally annotates each F1 cell.
pub fn format_table(rows: &[(String, MetricsReport)], markers: Option<&[&str]>) -> String {
    let name_width = rows.iter().map(|(n, _)| n.chars().count()).chain([5]).max().unwrap_or(5);
    let mut out = format!(
        "{:<name_width$}  {:>9}  {:>9}  {:>9}  {:>10}\n",
        "Model", "Precision", "Recall", "F1", "ExactMatch"
    );
    for (i, (name, r)) in rows.iter().enumerate() {
        let mark = markers.and_then(|m| m.get(i)).copied().unwrap_or("");
        let f1 = format!("{:.2}{mark}", r.f1);
        out.push_str(&format!(
            "{name:<name_width$}  {:>9.2}  {:>9.2}  {f1:>9}  {:>10.2}\n",
            r.precision, r.recall, r.exact_match
        ));
    }
    out
}

/// `Index;Text;Cause;Effect` rows rebuilt from predicted tags.
pub fn write_predictions(
    sink: impl Write,
    examples: &[PreparedExample],
    predictions: &[Prediction],
    delimiter: u8,
) -> Result<(), EvalError> {
    if examples.len() != predictions.len() {
        return Err(EvalError::Length {
            what: "predictions",
            gold: examples.len(),
            pred: predictions.len(),
        });
    }
    let rows: Vec<RawExample> = examples
        .iter()
        .zip(predictions)
        .map(|(e, p)| {
            let (cause, effect) = decode_spans(&e.example, &p.token_tags);
            RawExample::new(e.example.id.clone(), e.example.text.clone()).with_spans(cause, effect)
        })
        .collect();
    write_dataset(sink, &rows, delimiter)?;
    Ok(())
}
