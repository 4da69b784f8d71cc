//! Word-level weighted precision, recall and F1, and exact match.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::SpanType;

/// Confusion counts for one collapsed class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl ClassCounts {
    pub fn support(&self) -> usize {
        self.true_pos + self.false_neg
    }

    pub fn predicted(&self) -> usize {
        self.true_pos + self.false_pos
    }

    /// Zero when nothing was predicted.
    pub fn precision(&self) -> f64 {
        ratio(self.true_pos, self.predicted())
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_pos, self.support())
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Scores in percent plus the counts behind them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub exact_match: f64,
    pub examples: usize,
    pub words: usize,
    /// Indexed cause, effect, other.
    pub counts: [ClassCounts; 3],
}

fn check_aligned(gold: &[Vec<SpanType>], pred: &[Vec<SpanType>]) -> Result<(), EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::Length {
            what: "examples",
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    for (g, p) in gold.iter().zip(pred) {
        if g.len() != p.len() {
            return Err(EvalError::Length {
                what: "words",
                gold: g.len(),
                pred: p.len(),
            });
        }
    }
    Ok(())
}

pub fn confusion(gold: &[Vec<SpanType>], pred: &[Vec<SpanType>]) -> Result<[ClassCounts; 3], EvalError> {
    check_aligned(gold, pred)?;
    let mut counts = [ClassCounts::default(); 3];
    for (g, p) in gold.iter().flatten().zip(pred.iter().flatten()) {
        if g == p {
            counts[g.index()].true_pos += 1;
        } else {
            counts[g.index()].false_neg += 1;
            counts[p.index()].false_pos += 1;
        }
    }
    Ok(counts)
}

/// Support-weighted `(precision, recall, f1)` in percent over all words.
pub fn token_metrics(gold: &[Vec<SpanType>], pred: &[Vec<SpanType>]) -> Result<(f64, f64, f64), EvalError> {
    Ok(weighted(&confusion(gold, pred)?))
}

fn weighted(counts: &[ClassCounts; 3]) -> (f64, f64, f64) {
    let total: usize = counts.iter().map(ClassCounts::support).sum();
    if total == 0 {
        return (0.0, 0.0, 0.0);
    }
    let avg = |f: fn(&ClassCounts) -> f64| {
        100.0 * counts.iter().map(|c| c.support() as f64 * f(c)).sum::<f64>() / total as f64
    };
    (avg(ClassCounts::precision), avg(ClassCounts::recall), avg(ClassCounts::f1))
}

/// Percentage of examples with every word right.
pub fn exact_match(gold: &[Vec<SpanType>], pred: &[Vec<SpanType>]) -> Result<f64, EvalError> {
    check_aligned(gold, pred)?;
    if gold.is_empty() {
        return Ok(0.0);
    }
    let hits = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    Ok(100.0 * hits as f64 / gold.len() as f64)
}

pub fn evaluate(gold: &[Vec<SpanType>], pred: &[Vec<SpanType>]) -> Result<MetricsReport, EvalError> {
    let counts = confusion(gold, pred)?;
    let (precision, recall, f1) = weighted(&counts);
    Ok(MetricsReport {
        precision,
        recall,
        f1,
        exact_match: exact_match(gold, pred)?,
        examples: gold.len(),
        words: gold.iter().map(Vec::len).sum(),
        counts,
    })
}

/// Anything that turns aligned gold and predicted word labels into a report.
pub trait Scorer: Sync {
    fn score(&self, gold: &[Vec<SpanType>], pred: &[Vec<SpanType>]) -> Result<MetricsReport, EvalError>;
}

/// [`evaluate`] as a scorer.
#[derive(Clone, Copy, Debug, Default)]
pub struct WeightedScorer;

impl Scorer for WeightedScorer {
    fn score(&self, gold: &[Vec<SpanType>], pred: &[Vec<SpanType>]) -> Result<MetricsReport, EvalError> {
        evaluate(gold, pred)
    }
}

/// Mean of each score over several reports; counts are summed.
pub fn mean_report(reports: &[MetricsReport]) -> Option<MetricsReport> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let mut counts = [ClassCounts::default(); 3];
    for r in reports {
        for (c, x) in counts.iter_mut().zip(&r.counts) {
            c.true_pos += x.true_pos;
            c.false_pos += x.false_pos;
            c.false_neg += x.false_neg;
        }
    }
    Some(MetricsReport {
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        f1: mean(|r| r.f1),
        exact_match: mean(|r| r.exact_match),
        examples: reports.iter().map(|r| r.examples).sum(),
        words: reports.iter().map(|r| r.words).sum(),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use SpanType::*;

    #[test]
    fn hand_counted_case() {
        let (p, r, f) = token_metrics(&[vec![Cause, Cause, Effect, Other]], &[vec![Cause, Effect, Effect, Other]]).unwrap();
        assert!((p - 87.5).abs() < 1e-12);
        assert!((r - 75.0).abs() < 1e-12);
        assert!((f - 75.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_degenerate() {
        let g = vec![vec![Cause, Other], vec![Effect]];
        let r = evaluate(&g, &g).unwrap();
        assert_eq!((r.precision, r.recall, r.f1, r.exact_match), (100.0, 100.0, 100.0, 100.0));
        let o = vec![vec![Other; 3]];
        assert_eq!(token_metrics(&o, &o).unwrap(), (100.0, 100.0, 100.0));
    }

    #[test]
    fn unpredicted_class_has_zero_precision() {
        let c = confusion(&[vec![Cause, Other]], &[vec![Other, Other]]).unwrap();
        assert_eq!(c[0].precision(), 0.0);
        assert_eq!(c[0].f1(), 0.0);
    }

    #[test]
    fn exact_match_counts_examples() {
        let g = vec![vec![Cause, Other], vec![Other]];
        let p = vec![vec![Cause, Effect], vec![Other]];
        assert_eq!(exact_match(&g, &p).unwrap(), 50.0);
        assert_eq!(exact_match(&[vec![Other]], &[vec![Other]]).unwrap(), 100.0);
    }

    #[test]
    fn misaligned_inputs_rejected() {
        assert!(token_metrics(&[vec![Cause]], &[vec![Cause, Other]]).is_err());
        assert!(exact_match(&[vec![Cause]], &[]).is_err());
    }
}
