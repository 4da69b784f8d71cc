//! Character-offset ranges and cause/effect span placement.

use serde::{Deserialize, Serialize};

use super::{CorpusError, RawExample};

/// Half-open range of character (Unicode scalar) offsets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CharRange {
    pub start: usize,
    pub end: usize,
}

impl CharRange {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn intersects(&self, other: &CharRange) -> bool {
        self.start < other.end && other.start < self.end
    }
}

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Characters `[start, end)` of `text`; out-of-range bounds are clamped.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let from = indices.clone().nth(start).unwrap_or(text.len());
    let to = indices.nth(end).unwrap_or(text.len()).max(from);
    &text[from..to]
}

/// Every occurrence of `needle` in `haystack`, overlapping ones included,
/// as character ranges in increasing order.
pub fn find_all(haystack: &str, needle: &str) -> Vec<CharRange> {
    if needle.is_empty() {
        return Vec::new();
    }
    let needle_chars = char_len(needle);
    let mut out = Vec::new();
    for (char_idx, (byte_idx, _)) in haystack.char_indices().enumerate() {
        if haystack[byte_idx..].starts_with(needle) {
            out.push(CharRange::new(char_idx, char_idx + needle_chars));
        }
    }
    out
}

/// Places the cause and effect substrings in the text.
///
/// Each span takes its first occurrence. When those overlap, the shorter span
/// (the cause on equal length) advances through its later occurrences until
/// the two are disjoint; if that fails the longer span advances as well.
/// Returns `(cause, effect)`; an empty substring yields `None`.
pub fn locate_spans(
    ex: &RawExample,
) -> Result<(Option<CharRange>, Option<CharRange>), CorpusError> {
    let find = |which: &'static str, s: &str| -> Result<Option<Vec<CharRange>>, CorpusError> {
        if s.is_empty() {
            return Ok(None);
        }
        let occ = find_all(&ex.text, s);
        if occ.is_empty() {
            return Err(CorpusError::SpanNotFound {
                id: ex.id.clone(),
                which,
                text: s.to_owned(),
            });
        }
        Ok(Some(occ))
    };
    let cause = find("cause", &ex.cause)?;
    let effect = find("effect", &ex.effect)?;

    let (cause, effect) = match (cause, effect) {
        (Some(c), Some(e)) => (c, e),
        (c, e) => return Ok((c.map(|v| v[0]), e.map(|v| v[0]))),
    };
    if !cause[0].intersects(&effect[0]) {
        return Ok((Some(cause[0]), Some(effect[0])));
    }

    let cause_is_shorter = cause[0].len() <= effect[0].len();
    let (shorter, longer) = if cause_is_shorter {
        (&cause, &effect)
    } else {
        (&effect, &cause)
    };
    let placed = longer
        .iter()
        .find_map(|l| shorter.iter().find(|s| !s.intersects(l)).map(|s| (*s, *l)));
    match placed {
        Some((s, l)) if cause_is_shorter => Ok((Some(s), Some(l))),
        Some((s, l)) => Ok((Some(l), Some(s))),
        None => Err(CorpusError::NoDisjointPlacement(ex.id.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(text: &str, cause: &str, effect: &str) -> RawExample {
        RawExample::new("t", text).with_spans(cause, effect)
    }

    /// Oracle: the lexicographically first disjoint (effect, cause) pair when
    /// the longer span keeps its first occurrence.
    fn first_disjoint_pair(text: &str, cause: &str, effect: &str) -> Option<(CharRange, CharRange)> {
        let cs = find_all(text, cause);
        let es = find_all(text, effect);
        for e in &es {
            for c in &cs {
                if !c.intersects(e) {
                    return Some((*c, *e));
                }
            }
        }
        None
    }

    #[test]
    fn unique_occurrences() {
        let (c, e) = locate_spans(&ex("X because Y", "Y", "X")).unwrap();
        assert_eq!(e, Some(CharRange::new(0, 1)));
        assert_eq!(c, Some(CharRange::new(10, 11)));
    }

    #[test]
    fn overlapping_first_occurrences_move_the_shorter_span() {
        let text = "aa b aa";
        let (c, e) = locate_spans(&ex(text, "aa", "aa b")).unwrap();
        assert_eq!(e, Some(CharRange::new(0, 4)));
        assert_eq!(c, Some(CharRange::new(5, 7)));
        assert_eq!(first_disjoint_pair(text, "aa", "aa b"), Some((c.unwrap(), e.unwrap())));
    }

    #[test]
    fn absent_span_is_an_error() {
        let err = locate_spans(&ex("X because Y", "zz", "X")).unwrap_err();
        assert!(matches!(err, CorpusError::SpanNotFound { which: "cause", .. }));
    }

    #[test]
    fn no_disjoint_placement() {
        let err = locate_spans(&ex("abc", "ab", "bc")).unwrap_err();
        assert!(matches!(err, CorpusError::NoDisjointPlacement(_)));
    }

    #[test]
    fn empty_spans_are_none() {
        assert_eq!(locate_spans(&ex("abc", "", "")).unwrap(), (None, None));
        let (c, e) = locate_spans(&ex("abc", "b", "")).unwrap();
        assert_eq!((c, e), (Some(CharRange::new(1, 2)), None));
    }

    #[test]
    fn char_offsets_not_bytes() {
        let (c, _) = locate_spans(&ex("£250 fee", "fee", "")).unwrap();
        assert_eq!(c, Some(CharRange::new(5, 8)));
        assert_eq!(char_slice("£250 fee", 5, 8), "fee");
        assert_eq!(char_slice("£250 fee", 0, 4), "£250");
    }

    #[test]
    fn overlapping_occurrences_found() {
        assert_eq!(find_all("aaa", "aa"), vec![CharRange::new(0, 2), CharRange::new(1, 3)]);
    }
}
