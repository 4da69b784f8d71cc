//! Word segmentation and the JSON-lines tokenization format.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{CorpusError, Word};

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201c}' | '\u{201d}' | '\u{2013}' | '\u{2014}' | '\u{2026}'
        )
}

/// Splits on whitespace, then peels leading and trailing punctuation off each
/// chunk as single-character words. Offsets are in characters.
pub fn whitespace_words(text: &str) -> Vec<Word> {
    let chars: Vec<char> = text.chars().collect();
    let mut words = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let end = i;

        let mut lo = start;
        while lo < end && is_punct(chars[lo]) {
            lo += 1;
        }
        let mut hi = end;
        while hi > lo && is_punct(chars[hi - 1]) {
            hi -= 1;
        }
        let piece = |a: usize, b: usize| Word::new(chars[a..b].iter().collect::<String>(), a, b);
        words.extend((start..lo).map(|k| piece(k, k + 1)));
        if lo < hi {
            words.push(piece(lo, hi));
        }
        words.extend((hi.max(lo)..end).map(|k| piece(k, k + 1)));
    }
    words
}

/// One token per word: `(pieces, token_to_word)`.
pub fn whitespace_tokens(words: &[Word]) -> (Vec<String>, Vec<usize>) {
    let pieces = words.iter().map(|w| w.surface.clone()).collect();
    (pieces, (0..words.len()).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordRecord {
    pub surface: String,
    pub start: usize,
    pub end: usize,
    #[serde(default)]
    pub pos: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub piece: String,
    pub word_index: usize,
}

/// One line of a tokenization file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub id: String,
    pub words: Vec<WordRecord>,
    pub tokens: Vec<TokenRecord>,
}

impl TokenizedDoc {
    pub fn from_words(id: impl Into<String>, words: &[Word], pieces: &[String], map: &[usize]) -> Self {
        Self {
            id: id.into(),
            words: words
                .iter()
                .map(|w| WordRecord {
                    surface: w.surface.clone(),
                    start: w.char_start,
                    end: w.char_end,
                    pos: w.pos.clone(),
                })
                .collect(),
            tokens: pieces
                .iter()
                .zip(map)
                .map(|(p, &w)| TokenRecord {
                    piece: p.clone(),
                    word_index: w,
                })
                .collect(),
        }
    }

    pub fn words(&self) -> Vec<Word> {
        self.words
            .iter()
            .map(|w| Word {
                surface: w.surface.clone(),
                char_start: w.start,
                char_end: w.end,
                pos: w.pos.clone(),
                label: super::LabelTag::Outside,
            })
            .collect()
    }

    pub fn pieces(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.piece.clone()).collect()
    }

    pub fn token_to_word(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.word_index).collect()
    }
}

pub fn read_tokenization(source: impl BufRead) -> Result<HashMap<String, TokenizedDoc>, CorpusError> {
    let mut out = HashMap::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: TokenizedDoc =
            serde_json::from_str(&line).map_err(|e| CorpusError::TokenizationFormat {
                line: i + 1,
                message: e.to_string(),
            })?;
        if let Some(bad) = doc.tokens.iter().position(|t| t.word_index >= doc.words.len()) {
            return Err(CorpusError::OrphanToken {
                id: doc.id,
                token: bad,
            });
        }
        let id = doc.id.clone();
        if out.insert(id.clone(), doc).is_some() {
            return Err(CorpusError::DuplicateId(id));
        }
    }
    Ok(out)
}

pub fn write_tokenization<'a>(
    mut sink: impl Write,
    docs: impl IntoIterator<Item = &'a TokenizedDoc>,
) -> Result<(), CorpusError> {
    for doc in docs {
        let line = serde_json::to_string(doc).map_err(std::io::Error::other)?;
        writeln!(sink, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(text: &str) -> Vec<String> {
        whitespace_words(text).into_iter().map(|w| w.surface).collect()
    }

    #[test]
    fn punctuation_split_off() {
        assert_eq!(surfaces("Sales rose (sharply)."), ["Sales", "rose", "(", "sharply", ")", "."]);
        assert_eq!(surfaces("11.7m tonnes, $900"), ["11.7m", "tonnes", ",", "$", "900"]);
        assert_eq!(surfaces("..."), [".", ".", "."]);
    }

    #[test]
    fn offsets_are_characters() {
        let w = whitespace_words("a £250 fee");
        assert_eq!((w[1].char_start, w[1].char_end), (2, 6));
        assert_eq!((w[2].char_start, w[2].char_end), (7, 10));
    }

    #[test]
    fn words_sorted_and_disjoint() {
        let w = whitespace_words("  x,y  \"quoted\" end. ");
        for pair in w.windows(2) {
            assert!(pair[0].char_end <= pair[1].char_start);
        }
        assert!(w.iter().all(|w| w.char_start < w.char_end));
    }

    #[test]
    fn jsonl_round_trip() {
        let line = r###"{"id":"0001.1","words":[{"surface":"Loss","start":0,"end":4,"pos":"NN"}],"tokens":[{"piece":"Lo","word_index":0},{"piece":"##ss","word_index":0}]}"###;
        let docs = read_tokenization(line.as_bytes()).unwrap();
        let doc = &docs["0001.1"];
        assert_eq!(doc.pieces(), ["Lo", "##ss"]);
        assert_eq!(doc.words()[0].pos.as_deref(), Some("NN"));
        let mut out = Vec::new();
        write_tokenization(&mut out, [doc]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().trim(), line);
    }

    #[test]
    fn jsonl_orphan_token() {
        let line = r#"{"id":"x","words":[],"tokens":[{"piece":"a","word_index":0}]}"#;
        assert!(matches!(read_tokenization(line.as_bytes()), Err(CorpusError::OrphanToken { .. })));
    }
}
