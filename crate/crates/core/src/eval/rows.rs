//! Scoring task files against each other by id.

use std::collections::HashMap;

use super::metrics::{MetricsReport, Scorer};
use super::EvalError;
use crate::corpus::{encode_bio, locate_spans, whitespace_words, RawExample, SpanType};

/// Collapsed labels of the whitespace words of `row`.
pub fn span_labels(row: &RawExample) -> Result<Vec<SpanType>, EvalError> {
    let (cause, effect) = locate_spans(row)?;
    let words = encode_bio(&row.id, whitespace_words(&row.text), cause, effect)?;
    Ok(words.iter().map(|w| w.label.collapse()).collect())
}

/// Scores predicted rows against gold rows matched by id. Both sides must hold
/// the same ids and the same text per id.
pub fn score_rows(gold: &[RawExample], pred: &[RawExample], scorer: &dyn Scorer) -> Result<MetricsReport, EvalError> {
    let by_id: HashMap<&str, &RawExample> = pred.iter().map(|r| (r.id.as_str(), r)).collect();
    let missing: Vec<String> = gold
        .iter()
        .filter(|g| !by_id.contains_key(g.id.as_str()))
        .map(|g| g.id.clone())
        .collect();
    let gold_ids: std::collections::HashSet<&str> = gold.iter().map(|g| g.id.as_str()).collect();
    let extra: Vec<String> = pred
        .iter()
        .filter(|p| !gold_ids.contains(p.id.as_str()))
        .map(|p| p.id.clone())
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(EvalError::Ids { missing, extra });
    }
    let mut g_labels = Vec::with_capacity(gold.len());
    let mut p_labels = Vec::with_capacity(gold.len());
    for g in gold {
        let p = by_id[g.id.as_str()];
        if p.text != g.text {
            return Err(EvalError::TextMismatch(g.id.clone()));
        }
        g_labels.push(span_labels(g)?);
        p_labels.push(span_labels(p)?);
    }
    scorer.score(&g_labels, &p_labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::WeightedScorer;

    fn row(id: &str, cause: &str, effect: &str) -> RawExample {
        RawExample::new(id, "Profits fell because demand was weak.").with_spans(cause, effect)
    }

    #[test]
    fn identical_rows_score_perfectly() {
        let g = vec![row("a", "demand was weak.", "Profits fell"), row("b", "", "")];
        let r = score_rows(&g, &g, &WeightedScorer).unwrap();
        assert_eq!((r.precision, r.recall, r.f1, r.exact_match), (100.0, 100.0, 100.0, 100.0));
    }

    #[test]
    fn partial_span_and_order_independence() {
        let g = vec![row("a", "demand was weak.", "Profits fell"), row("b", "demand", "Profits")];
        let p = vec![row("b", "demand", "Profits"), row("a", "weak.", "Profits fell")];
        let r = score_rows(&g, &p, &WeightedScorer).unwrap();
        assert_eq!(r.exact_match, 50.0);
        assert_eq!(r.words, 14);
    }

    #[test]
    fn id_mismatch_lists_ids() {
        let g = vec![row("a", "", ""), row("b", "", "")];
        let p = vec![row("a", "", ""), row("c", "", "")];
        match score_rows(&g, &p, &WeightedScorer) {
            Err(EvalError::Ids { missing, extra }) => {
                assert_eq!(missing, ["b"]);
                assert_eq!(extra, ["c"]);
            }
            other => panic!("{other:?}"),
        }
    }
}
