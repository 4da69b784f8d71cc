//! Viterbi decoding of per-position tag scores under a BIO transition model.
//!
//! The transition model hard-masks illegal BIO moves (an `I-X` may only follow
//! `B-X` or `I-X`, and never opens a sequence), so every decoded sequence
//! splits into well-formed contiguous spans.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LabelTag, NUM_TAGS};
use crate::ndcore::{Scalar, Tensor};

pub type Row = [f64; NUM_TAGS];

#[derive(Debug, Error, PartialEq)]
pub enum ViterbiError {
    #[error("no non-empty tag sequence to estimate transitions from")]
    EmptyCorpus,
    #[error("empty emission sequence")]
    EmptySequence,
    #[error("every tag path has zero probability")]
    NoFeasiblePath,
    #[error("emission [{row}, {col}] is {value}")]
    BadEmission { row: usize, col: usize, value: f64 },
    #[error("brute force is limited to {max} positions, got {n}")]
    TooLong { n: usize, max: usize },
    #[error("emission matrix has {0} columns, expected 5")]
    Width(usize),
}

/// Whether `next` may follow `prev`.
pub fn transition_allowed(prev: LabelTag, next: LabelTag) -> bool {
    match next {
        LabelTag::InsideCause => matches!(prev, LabelTag::BeginCause | LabelTag::InsideCause),
        LabelTag::InsideEffect => matches!(prev, LabelTag::BeginEffect | LabelTag::InsideEffect),
        _ => true,
    }
}

pub fn start_allowed(tag: LabelTag) -> bool {
    !tag.is_inside()
}

/// Log start and transition scores; disallowed cells hold `-inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionModel {
    pub log_start: Row,
    pub log_trans: [Row; NUM_TAGS],
}

impl TransitionModel {
    pub fn structural_mask() -> [[bool; NUM_TAGS]; NUM_TAGS] {
        let mut m = [[false; NUM_TAGS]; NUM_TAGS];
        for p in LabelTag::ALL {
            for n in LabelTag::ALL {
                m[p.index()][n.index()] = transition_allowed(p, n);
            }
        }
        m
    }

    /// Builds a model from arbitrary scores, forcing disallowed cells to
    /// `-inf`. Scores need not be normalized.
    pub fn from_scores(start: Row, trans: [Row; NUM_TAGS]) -> Self {
        let mut tm = Self {
            log_start: start,
            log_trans: trans,
        };
        tm.apply_mask();
        tm
    }

    /// Equal probability over the allowed cells of every row.
    pub fn uniform() -> Self {
        Self::from_counts(&[0.0; NUM_TAGS], &[[0.0; NUM_TAGS]; NUM_TAGS])
    }

    fn apply_mask(&mut self) {
        for t in LabelTag::ALL {
            if !start_allowed(t) {
                self.log_start[t.index()] = f64::NEG_INFINITY;
            }
            for n in LabelTag::ALL {
                if !transition_allowed(t, n) {
                    self.log_trans[t.index()][n.index()] = f64::NEG_INFINITY;
                }
            }
        }
    }

    /// Add-one smoothing restricted to allowed cells, then log-normalization.
    fn from_counts(start: &Row, trans: &[Row; NUM_TAGS]) -> Self {
        let normalize = |counts: &Row, allowed: &dyn Fn(LabelTag) -> bool| -> Row {
            let mut row = [f64::NEG_INFINITY; NUM_TAGS];
            let total: f64 = LabelTag::ALL
                .into_iter()
                .filter(|&t| allowed(t))
                .map(|t| counts[t.index()] + 1.0)
                .sum();
            for t in LabelTag::ALL.into_iter().filter(|&t| allowed(t)) {
                row[t.index()] = ((counts[t.index()] + 1.0) / total).ln();
            }
            row
        };
        let log_start = normalize(start, &start_allowed);
        let mut log_trans = [[f64::NEG_INFINITY; NUM_TAGS]; NUM_TAGS];
        for p in LabelTag::ALL {
            log_trans[p.index()] = normalize(&trans[p.index()], &|n| transition_allowed(p, n));
        }
        Self {
            log_start,
            log_trans,
        }
    }

    /// Estimates the model from gold tag sequences.
    pub fn estimate<S: AsRef<[LabelTag]>>(sequences: &[S]) -> Result<Self, ViterbiError> {
        let mut start = [0.0; NUM_TAGS];
        let mut trans = [[0.0; NUM_TAGS]; NUM_TAGS];
        let mut any = false;
        for seq in sequences {
            let seq = seq.as_ref();
            let Some(first) = seq.first() else { continue };
            any = true;
            start[first.index()] += 1.0;
            for w in seq.windows(2) {
                trans[w[0].index()][w[1].index()] += 1.0;
            }
        }
        if !any {
            return Err(ViterbiError::EmptyCorpus);
        }
        Ok(Self::from_counts(&start, &trans))
    }

    /// Probabilities (disallowed cells as 0) for inspection.
    pub fn to_json(&self) -> serde_json::Value {
        let p = |v: f64| v.exp();
        serde_json::to_value(TransitionDump {
            tags: LabelTag::ALL.iter().map(|t| t.as_str().to_owned()).collect(),
            start: self.log_start.iter().copied().map(p).collect(),
            transitions: self
                .log_trans
                .iter()
                .map(|r| r.iter().copied().map(p).collect())
                .collect(),
        })
        .expect("plain numbers serialize")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, serde_json::Error> {
        let dump: TransitionDump = serde_json::from_value(v.clone())?;
        let ln = |p: f64| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
        let mut start = [0.0; NUM_TAGS];
        let mut trans = [[0.0; NUM_TAGS]; NUM_TAGS];
        for (i, row) in trans.iter_mut().enumerate() {
            start[i] = ln(*dump.start.get(i).unwrap_or(&0.0));
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = ln(dump.transitions.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0));
            }
        }
        Ok(Self::from_scores(start, trans))
    }
}

#[derive(Serialize, Deserialize)]
struct TransitionDump {
    tags: Vec<String>,
    start: Vec<f64>,
    transitions: Vec<Vec<f64>>,
}

/// Rows of a `n x 5` tensor as emission rows.
pub fn emission_rows<T: Scalar>(t: &Tensor<T>) -> Result<Vec<Row>, ViterbiError> {
    if t.cols() != NUM_TAGS {
        return Err(ViterbiError::Width(t.cols()));
    }
    Ok((0..t.rows())
        .map(|r| {
            let mut row = [0.0; NUM_TAGS];
            for (o, v) in row.iter_mut().zip(t.row(r)) {
                *o = v.as_f64();
            }
            row
        })
        .collect())
}

fn validate(emissions: &[Row]) -> Result<(), ViterbiError> {
    if emissions.is_empty() {
        return Err(ViterbiError::EmptySequence);
    }
    for (r, row) in emissions.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v.is_nan() || v == f64::INFINITY {
                return Err(ViterbiError::BadEmission { row: r, col: c, value: v });
            }
        }
    }
    Ok(())
}

/// Total score of `path`, summed left to right.
pub fn path_score(emissions: &[Row], tm: &TransitionModel, path: &[usize]) -> f64 {
    let mut s = tm.log_start[path[0]] + emissions[0][path[0]];
    for i in 1..path.len() {
        s = s + tm.log_trans[path[i - 1]][path[i]] + emissions[i][path[i]];
    }
    s
}

/// Highest-scoring tag sequence. Among equal-scoring sequences, the
/// lexicographically smallest tag-index sequence wins.
///
/// Scores are accumulated over suffixes, then the path is rebuilt from the
/// left taking the smallest optimal tag at each position, which makes the
/// tie-break agree with exhaustive enumeration.
pub fn decode(emissions: &[Row], tm: &TransitionModel) -> Result<Vec<LabelTag>, ViterbiError> {
    validate(emissions)?;
    let n = emissions.len();
    // suffix[i][y]: best score of positions i.. given tag y at i.
    let mut suffix = vec![[f64::NEG_INFINITY; NUM_TAGS]; n];
    suffix[n - 1] = emissions[n - 1];
    for i in (0..n - 1).rev() {
        for y in 0..NUM_TAGS {
            let best = (0..NUM_TAGS)
                .map(|next| tm.log_trans[y][next] + suffix[i + 1][next])
                .fold(f64::NEG_INFINITY, f64::max);
            suffix[i][y] = emissions[i][y] + best;
        }
    }

    let pick = |scores: [f64; NUM_TAGS]| -> Option<usize> {
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if best == f64::NEG_INFINITY {
            return None;
        }
        scores.iter().position(|&s| s == best)
    };

    let mut path = Vec::with_capacity(n);
    let first = pick(std::array::from_fn(|y| tm.log_start[y] + suffix[0][y]))
        .ok_or(ViterbiError::NoFeasiblePath)?;
    path.push(first);
    for i in 1..n {
        let prev = path[i - 1];
        let next = pick(std::array::from_fn(|y| tm.log_trans[prev][y] + suffix[i][y]))
            .ok_or(ViterbiError::NoFeasiblePath)?;
        path.push(next);
    }
    Ok(path.into_iter().map(|i| LabelTag::ALL[i]).collect())
}

pub const BRUTE_FORCE_MAX_LEN: usize = 10;

/// Exhaustive search over all `5^n` sequences; the reference for [`decode`].
pub fn brute_force_decode(
    emissions: &[Row],
    tm: &TransitionModel,
) -> Result<Vec<LabelTag>, ViterbiError> {
    validate(emissions)?;
    let n = emissions.len();
    if n > BRUTE_FORCE_MAX_LEN {
        return Err(ViterbiError::TooLong {
            n,
            max: BRUTE_FORCE_MAX_LEN,
        });
    }
    let mut path = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let s = path_score(emissions, tm, &path);
        if s > f64::NEG_INFINITY && best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, path.clone()));
        }
        // odometer increment, last position fastest → lexicographic order
        let mut i = n;
        loop {
            if i == 0 {
                let (_, p) = best.ok_or(ViterbiError::NoFeasiblePath)?;
                return Ok(p.into_iter().map(|i| LabelTag::ALL[i]).collect());
            }
            i -= 1;
            path[i] += 1;
            if path[i] < NUM_TAGS {
                break;
            }
            path[i] = 0;
        }
    }
}

/// Per-position argmax without transition constraints.
pub fn argmax_tags(emissions: &[Row]) -> Vec<LabelTag> {
    emissions
        .iter()
        .map(|row| {
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            LabelTag::ALL[row.iter().position(|&v| v == best).unwrap_or(NUM_TAGS - 1)]
        })
        .collect()
}

/// Whether a sequence respects the start and transition masks.
pub fn is_legal(tags: &[LabelTag]) -> bool {
    tags.first().is_none_or(|&t| start_allowed(t))
        && tags.windows(2).all(|w| transition_allowed(w[0], w[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use LabelTag::*;

    const NEG: f64 = f64::NEG_INFINITY;

    #[test]
    fn mask_matches_bio_rules() {
        let m = TransitionModel::structural_mask();
        assert!(!m[Outside.index()][InsideCause.index()]);
        assert!(!m[Outside.index()][InsideEffect.index()]);
        assert!(!m[BeginCause.index()][InsideEffect.index()]);
        assert!(!m[InsideCause.index()][InsideEffect.index()]);
        assert!(!m[BeginEffect.index()][InsideCause.index()]);
        assert!(!m[InsideEffect.index()][InsideCause.index()]);
        assert!(m[BeginCause.index()][InsideCause.index()]);
        assert!(m[InsideEffect.index()][BeginCause.index()]);
        assert_eq!(m.iter().flatten().filter(|&&a| !a).count(), 6);
    }

    #[test]
    fn estimate_single_outside() {
        let tm = TransitionModel::estimate(&[vec![Outside]]).unwrap();
        // allowed starts {B-C, B-E, O}: O gets 2/4, others 1/4
        assert!((tm.log_start[Outside.index()] - 0.5f64.ln()).abs() < 1e-12);
        assert!((tm.log_start[BeginCause.index()] - 0.25f64.ln()).abs() < 1e-12);
        assert_eq!(tm.log_start[InsideCause.index()], NEG);
    }

    #[test]
    fn estimate_forbidden_cell_always_neg_inf() {
        let tm = TransitionModel::estimate(&[vec![Outside, Outside, BeginEffect]]).unwrap();
        assert_eq!(tm.log_trans[Outside.index()][InsideCause.index()], NEG);
    }

    #[test]
    fn estimate_hand_count() {
        // row B-C: allowed next {B-C, I-C, B-E, O}; I-C seen once → (1+1)/(1+4)
        let tm = TransitionModel::estimate(&[vec![BeginCause, InsideCause]]).unwrap();
        let p = tm.log_trans[BeginCause.index()][InsideCause.index()].exp();
        assert!((p - 0.4).abs() < 1e-12);
        let rows_sum: f64 = tm.log_trans[BeginCause.index()].iter().map(|v| v.exp()).sum();
        assert!((rows_sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_empty_corpus() {
        let empty: Vec<Vec<LabelTag>> = vec![vec![]];
        assert_eq!(TransitionModel::estimate(&empty), Err(ViterbiError::EmptyCorpus));
    }

    fn peaked(tags: &[LabelTag]) -> Vec<Row> {
        tags.iter()
            .map(|t| {
                let mut r = [-10.0; NUM_TAGS];
                r[t.index()] = 0.0;
                r
            })
            .collect()
    }

    #[test]
    fn uniform_transitions_follow_legal_argmax() {
        let tags = [BeginEffect, InsideEffect, Outside, BeginCause, InsideCause];
        let out = decode(&peaked(&tags), &TransitionModel::uniform()).unwrap();
        assert_eq!(out, tags);
    }

    #[test]
    fn illegal_argmax_is_repaired() {
        let em = vec![[-5.0, -5.0, -5.0, -5.0, -0.1], [-3.0, -0.2, -6.0, -6.0, -2.0]];
        let tm = TransitionModel::uniform();
        assert_eq!(argmax_tags(&em), [Outside, InsideCause]);
        let out = decode(&em, &tm).unwrap();
        assert!(is_legal(&out));
        assert_eq!(out, brute_force_decode(&em, &tm).unwrap());
        assert_eq!(out, [Outside, Outside]);
    }

    #[test]
    fn single_position() {
        let em = vec![[-1.0, 5.0, -2.0, 0.0, -0.5]];
        let tm = TransitionModel::uniform();
        assert_eq!(decode(&em, &tm).unwrap(), [Outside]);
        assert_eq!(brute_force_decode(&em, &tm).unwrap(), [Outside]);
    }

    #[test]
    fn identical_rows_give_constant_path() {
        let em = vec![[0.0; NUM_TAGS]; 4];
        let tm = TransitionModel::from_scores([0.0; NUM_TAGS], [[0.0; NUM_TAGS]; NUM_TAGS]);
        let out = decode(&em, &tm).unwrap();
        assert_eq!(out, vec![BeginCause; 4]);
        assert_eq!(out, brute_force_decode(&em, &tm).unwrap());
    }

    #[test]
    fn lexicographic_tie_break() {
        // two optimal paths [B-C, O] and [O, B-C]; forward-lex picks the former
        let mut em = vec![[NEG; NUM_TAGS]; 2];
        em[0][BeginCause.index()] = 0.0;
        em[0][Outside.index()] = 0.0;
        em[1][BeginCause.index()] = 0.0;
        em[1][Outside.index()] = 0.0;
        let tm = TransitionModel::from_scores([0.0; NUM_TAGS], [[0.0; NUM_TAGS]; NUM_TAGS]);
        let mut trans = tm.log_trans;
        trans[BeginCause.index()][BeginCause.index()] = -1.0;
        trans[Outside.index()][Outside.index()] = -1.0;
        let tm = TransitionModel::from_scores(tm.log_start, trans);
        assert_eq!(decode(&em, &tm).unwrap(), [BeginCause, Outside]);
        assert_eq!(brute_force_decode(&em, &tm).unwrap(), [BeginCause, Outside]);
    }

    #[test]
    fn errors() {
        let tm = TransitionModel::uniform();
        assert_eq!(decode(&[], &tm), Err(ViterbiError::EmptySequence));
        let em = vec![[NEG; NUM_TAGS]];
        assert_eq!(decode(&em, &tm), Err(ViterbiError::NoFeasiblePath));
        assert_eq!(brute_force_decode(&em, &tm), Err(ViterbiError::NoFeasiblePath));
        let em = vec![[0.0; NUM_TAGS]; 11];
        assert!(matches!(brute_force_decode(&em, &tm), Err(ViterbiError::TooLong { .. })));
        let em = vec![[0.0, f64::NAN, 0.0, 0.0, 0.0]];
        assert!(matches!(decode(&em, &tm), Err(ViterbiError::BadEmission { .. })));
    }

    #[test]
    fn json_round_trip() {
        let tm = TransitionModel::estimate(&[vec![BeginCause, InsideCause, Outside]]).unwrap();
        let back = TransitionModel::from_json(&tm.to_json()).unwrap();
        for i in 0..NUM_TAGS {
            for j in 0..NUM_TAGS {
                let (a, b) = (tm.log_trans[i][j], back.log_trans[i][j]);
                assert!(a == b || (a - b).abs() < 1e-12);
            }
        }
    }
}
