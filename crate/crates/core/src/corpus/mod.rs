//! Task data: documents with cause/effect substrings, their word and subword
//! segmentation, and the five-tag BIO labelling that links the two.

mod bio;
mod dataset;
mod spans;
mod tokenize;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bio::{align_to_tokens, decode_spans, encode_bio, spans_from_word_tags, word_tags};
pub use dataset::{parse_dataset, read_dataset_file, write_dataset, DEFAULT_DELIMITER};
pub use spans::{char_len, char_slice, find_all, locate_spans, CharRange};
pub use tokenize::{
    read_tokenization, whitespace_tokens, whitespace_words, write_tokenization, TokenRecord,
    TokenizedDoc, WordRecord,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("missing required column {0:?}")]
    MissingColumn(&'static str),
    #[error("duplicate example id {0:?}")]
    DuplicateId(String),
    #[error("{id}: {which} text {text:?} does not occur in the document")]
    SpanNotFound {
        id: String,
        which: &'static str,
        text: String,
    },
    #[error("{0}: cause and effect cannot be placed without overlapping")]
    NoDisjointPlacement(String),
    #[error("{id}: word {word} intersects both the cause and the effect span")]
    WordInBothSpans { id: String, word: usize },
    #[error("{id}: token {token} has no source word")]
    OrphanToken { id: String, token: usize },
    #[error("{id}: word {word} has no tokens")]
    WordWithoutTokens { id: String, word: usize },
    #[error("{id}: token-to-word mapping decreases at token {token}")]
    NonMonotonicTokens { id: String, token: usize },
    #[error("{id}: word {word} has invalid character range {start}..{end}")]
    BadWordRange {
        id: String,
        word: usize,
        start: usize,
        end: usize,
    },
    #[error("POS vocabulary needs {needed} entries but capacity is {capacity}")]
    PosVocabOverflow { needed: usize, capacity: usize },
    #[error("tokenization line {line}: {message}")]
    TokenizationFormat { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One row of the task data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawExample {
    pub id: String,
    pub text: String,
    /// Empty when absent (e.g. unlabeled test data).
    pub cause: String,
    pub effect: String,
}

impl RawExample {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            cause: String::new(),
            effect: String::new(),
        }
    }

    pub fn with_spans(mut self, cause: impl Into<String>, effect: impl Into<String>) -> Self {
        self.cause = cause.into();
        self.effect = effect.into();
        self
    }
}

/// BIO tag over the cause (C) and effect (E) span types.
///
/// The discriminant is the class index used by the model and decoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LabelTag {
    #[serde(rename = "B-C")]
    BeginCause = 0,
    #[serde(rename = "I-C")]
    InsideCause = 1,
    #[serde(rename = "B-E")]
    BeginEffect = 2,
    #[serde(rename = "I-E")]
    InsideEffect = 3,
    #[serde(rename = "O")]
    Outside = 4,
}

pub const NUM_TAGS: usize = 5;

impl LabelTag {
    pub const ALL: [LabelTag; NUM_TAGS] = [
        LabelTag::BeginCause,
        LabelTag::InsideCause,
        LabelTag::BeginEffect,
        LabelTag::InsideEffect,
        LabelTag::Outside,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelTag::BeginCause => "B-C",
            LabelTag::InsideCause => "I-C",
            LabelTag::BeginEffect => "B-E",
            LabelTag::InsideEffect => "I-E",
            LabelTag::Outside => "O",
        }
    }

    pub fn collapse(self) -> SpanType {
        match self {
            LabelTag::BeginCause | LabelTag::InsideCause => SpanType::Cause,
            LabelTag::BeginEffect | LabelTag::InsideEffect => SpanType::Effect,
            LabelTag::Outside => SpanType::Other,
        }
    }

    pub fn is_begin(self) -> bool {
        matches!(self, LabelTag::BeginCause | LabelTag::BeginEffect)
    }

    pub fn is_inside(self) -> bool {
        matches!(self, LabelTag::InsideCause | LabelTag::InsideEffect)
    }

    /// `B-X` becomes `I-X`; other tags are unchanged.
    pub fn demote(self) -> Self {
        match self {
            LabelTag::BeginCause => LabelTag::InsideCause,
            LabelTag::BeginEffect => LabelTag::InsideEffect,
            t => t,
        }
    }
}

impl fmt::Display for LabelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LabelTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown tag {s:?}"))
    }
}

/// A tag with the B/I distinction removed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpanType {
    Cause,
    Effect,
    Other,
}

impl SpanType {
    pub const ALL: [SpanType; 3] = [SpanType::Cause, SpanType::Effect, SpanType::Other];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpanType::Cause => "C",
            SpanType::Effect => "E",
            SpanType::Other => "O",
        }
    }
}

/// A word of the document with character offsets `[char_start, char_end)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    pub surface: String,
    pub char_start: usize,
    pub char_end: usize,
    pub pos: Option<String>,
    pub label: LabelTag,
}

impl Word {
    pub fn new(surface: impl Into<String>, char_start: usize, char_end: usize) -> Self {
        Self {
            surface: surface.into(),
            char_start,
            char_end,
            pos: None,
            label: LabelTag::Outside,
        }
    }

    pub fn with_pos(mut self, pos: impl Into<String>) -> Self {
        self.pos = Some(pos.into());
        self
    }

    pub fn range(&self) -> CharRange {
        CharRange::new(self.char_start, self.char_end)
    }
}

/// A document aligned to subword tokens with one tag per retained token.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub text: String,
    pub words: Vec<Word>,
    /// Token pieces after truncation.
    pub tokens: Vec<String>,
    pub token_to_word: Vec<usize>,
    pub token_labels: Vec<LabelTag>,
    /// Token count before truncation.
    pub untruncated_len: usize,
}

impl LabeledExample {
    /// First retained token of each word, `None` when the word was truncated
    /// away.
    pub fn first_tokens(&self) -> Vec<Option<usize>> {
        let mut first = vec![None; self.words.len()];
        for (t, &w) in self.token_to_word.iter().enumerate() {
            if first[w].is_none() {
                first[w] = Some(t);
            }
        }
        first
    }

    pub fn gold_word_tags(&self) -> Vec<LabelTag> {
        self.words.iter().map(|w| w.label).collect()
    }

    pub fn is_truncated(&self) -> bool {
        self.tokens.len() < self.untruncated_len
    }
}

/// POS tag → one-hot index, dense from zero, bounded by the one-hot width.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosVocab {
    tags: Vec<String>,
}

impl PosVocab {
    /// Builds a sorted vocabulary of the distinct tags seen.
    pub fn build<'a>(
        tags: impl IntoIterator<Item = &'a str>,
        capacity: usize,
    ) -> Result<Self, CorpusError> {
        let set: BTreeSet<&str> = tags.into_iter().collect();
        if set.len() > capacity {
            return Err(CorpusError::PosVocabOverflow {
                needed: set.len(),
                capacity,
            });
        }
        Ok(Self {
            tags: set.into_iter().map(str::to_owned).collect(),
        })
    }

    pub fn from_tags(tags: Vec<String>, capacity: usize) -> Result<Self, CorpusError> {
        let n = tags.len();
        let vocab = Self::build(tags.iter().map(String::as_str), capacity)?;
        if vocab.len() != n {
            return Err(CorpusError::TokenizationFormat {
                line: 0,
                message: "POS vocabulary has duplicate tags".into(),
            });
        }
        Ok(vocab)
    }

    pub fn index(&self, tag: &str) -> Option<usize> {
        self.tags.binary_search_by(|t| t.as_str().cmp(tag)).ok()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}
