//! BIO encoding of located spans, subword alignment, and the inverse
//! reconstruction of span text from predicted tags.

use super::spans::{char_slice, CharRange};
use super::{CorpusError, LabelTag, LabeledExample, SpanType, Word};

/// Labels each word by the span its character range intersects. The first
/// intersecting word of a span takes `B-`, later ones `I-`.
pub fn encode_bio(
    id: &str,
    mut words: Vec<Word>,
    cause: Option<CharRange>,
    effect: Option<CharRange>,
) -> Result<Vec<Word>, CorpusError> {
    let mut seen_cause = false;
    let mut seen_effect = false;
    for (i, w) in words.iter_mut().enumerate() {
        let r = w.range();
        let in_cause = cause.is_some_and(|c| c.intersects(&r));
        let in_effect = effect.is_some_and(|e| e.intersects(&r));
        w.label = match (in_cause, in_effect) {
            (true, true) => {
                return Err(CorpusError::WordInBothSpans {
                    id: id.to_owned(),
                    word: i,
                })
            }
            (true, false) if !seen_cause => {
                seen_cause = true;
                LabelTag::BeginCause
            }
            (true, false) => LabelTag::InsideCause,
            (false, true) if !seen_effect => {
                seen_effect = true;
                LabelTag::BeginEffect
            }
            (false, true) => LabelTag::InsideEffect,
            (false, false) => LabelTag::Outside,
        };
    }
    Ok(words)
}

/// Projects word labels onto subword tokens.
///
/// `token_words[t]` is the source word of token `t`. Every piece inherits its
/// word's label, except that a `B-X` word's pieces after the first become
/// `I-X`. Tokens past `max_len` are dropped.
pub fn align_to_tokens(
    id: &str,
    text: &str,
    words: Vec<Word>,
    pieces: &[String],
    token_words: &[usize],
    max_len: usize,
) -> Result<LabeledExample, CorpusError> {
    assert_eq!(pieces.len(), token_words.len(), "one source word per piece");
    for (i, w) in words.iter().enumerate() {
        if w.char_start >= w.char_end {
            return Err(CorpusError::BadWordRange {
                id: id.to_owned(),
                word: i,
                start: w.char_start,
                end: w.char_end,
            });
        }
        if i > 0 && w.char_start < words[i - 1].char_end {
            return Err(CorpusError::BadWordRange {
                id: id.to_owned(),
                word: i,
                start: w.char_start,
                end: w.char_end,
            });
        }
    }
    let mut covered = vec![false; words.len()];
    for (t, &w) in token_words.iter().enumerate() {
        if w >= words.len() {
            return Err(CorpusError::OrphanToken {
                id: id.to_owned(),
                token: t,
            });
        }
        if t > 0 && w < token_words[t - 1] {
            return Err(CorpusError::NonMonotonicTokens {
                id: id.to_owned(),
                token: t,
            });
        }
        covered[w] = true;
    }
    if let Some(word) = covered.iter().position(|c| !c) {
        return Err(CorpusError::WordWithoutTokens {
            id: id.to_owned(),
            word,
        });
    }

    let keep = token_words.len().min(max_len);
    let token_labels = token_words[..keep]
        .iter()
        .enumerate()
        .map(|(t, &w)| {
            let label = words[w].label;
            if t > 0 && token_words[t - 1] == w {
                label.demote()
            } else {
                label
            }
        })
        .collect();

    Ok(LabeledExample {
        id: id.to_owned(),
        text: text.to_owned(),
        words,
        tokens: pieces[..keep].to_vec(),
        token_to_word: token_words[..keep].to_vec(),
        token_labels,
        untruncated_len: token_words.len(),
    })
}

/// Lifts token tags to word tags through each word's first token. Words whose
/// tokens were all truncated read as `O`.
pub fn word_tags(ex: &LabeledExample, token_tags: &[LabelTag]) -> Vec<LabelTag> {
    ex.first_tokens()
        .into_iter()
        .map(|t| t.and_then(|t| token_tags.get(t).copied()).unwrap_or(LabelTag::Outside))
        .collect()
}

/// Longest run of each span type (ties to the earliest) as `(first, last)`
/// word indices. `B-X` opens a run; `I-X` extends an open `X` run or opens
/// one when none is open.
fn longest_runs(tags: &[LabelTag]) -> [Option<(usize, usize)>; 2] {
    let mut best: [Option<(usize, usize)>; 2] = [None, None];
    for (slot, kind) in [SpanType::Cause, SpanType::Effect].into_iter().enumerate() {
        let mut open: Option<usize> = None;
        let close = |start: usize, end: usize, best: &mut Option<(usize, usize)>| {
            if best.is_none_or(|(s, e)| end - start > e - s) {
                *best = Some((start, end));
            }
        };
        for (i, &t) in tags.iter().enumerate() {
            let continues = t.collapse() == kind && t.is_inside() && open.is_some();
            if continues {
                continue;
            }
            if let Some(s) = open.take() {
                close(s, i - 1, &mut best[slot]);
            }
            if t.collapse() == kind {
                open = Some(i);
            }
        }
        if let Some(s) = open {
            close(s, tags.len() - 1, &mut best[slot]);
        }
    }
    best
}

/// Reconstructs `(cause, effect)` text from word-level tags.
pub fn spans_from_word_tags(text: &str, words: &[Word], tags: &[LabelTag]) -> (String, String) {
    let [cause, effect] = longest_runs(tags);
    let extract = |run: Option<(usize, usize)>| {
        run.map_or_else(String::new, |(s, e)| {
            char_slice(text, words[s].char_start, words[e].char_end).to_owned()
        })
    };
    (extract(cause), extract(effect))
}

/// Reconstructs `(cause, effect)` text from per-token predictions.
pub fn decode_spans(ex: &LabeledExample, predicted: &[LabelTag]) -> (String, String) {
    let tags = word_tags(ex, predicted);
    spans_from_word_tags(&ex.text, &ex.words, &tags)
}
