//! Assembly of model-ready examples from task rows, tokenizations, parses and
//! embeddings.

use std::collections::HashMap;

use thiserror::Error;

use crate::corpus::{
    align_to_tokens, char_len, encode_bio, locate_spans, CorpusError, LabeledExample, RawExample, TokenizedDoc, Word,
};
use crate::depgraph::{build_token_graph, GraphError, ParsedDoc, PosColumn};
use crate::model::{EmbeddingError, EmbeddingProvider, ModelConfig, ModelError, PreparedExample};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}: no dependency parse")]
    MissingParse(String),
    #[error("{0}: no tokenization")]
    MissingTokenization(String),
    #[error("{id}: tokenization has {words} words, parse has {parsed}")]
    WordCount { id: String, words: usize, parsed: usize },
    #[error("{id}: parsed word {word} ({form:?}) not found in the text")]
    FormNotFound { id: String, word: usize, form: String },
    #[error("{count} parsed documents without ids cannot be matched to {rows} rows")]
    UnmatchedParses { count: usize, rows: usize },
    #[error("duplicate parse for document {0:?}")]
    DuplicateParse(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Keys parsed documents by id. Documents without ids are matched to `rows`
/// by position when every document lacks one and the counts agree.
pub fn index_parses(docs: Vec<ParsedDoc>, rows: &[RawExample]) -> Result<HashMap<String, ParsedDoc>, PipelineError> {
    if !docs.is_empty() && docs.iter().all(|d| d.id.is_none()) {
        if docs.len() != rows.len() {
            return Err(PipelineError::UnmatchedParses {
                count: docs.len(),
                rows: rows.len(),
            });
        }
        return Ok(rows.iter().map(|r| r.id.clone()).zip(docs).collect());
    }
    let mut out = HashMap::new();
    for d in docs {
        let Some(id) = d.id.clone() else {
            return Err(PipelineError::UnmatchedParses {
                count: 1,
                rows: rows.len(),
            });
        };
        if out.insert(id.clone(), d).is_some() {
            return Err(PipelineError::DuplicateParse(id));
        }
    }
    Ok(out)
}

/// Words from the parse, placed in `text` by their MISC offsets or, failing
/// that, by searching forward for each form.
pub fn words_from_parse(id: &str, text: &str, parse: &ParsedDoc) -> Result<Vec<Word>, PipelineError> {
    let chars: Vec<char> = text.chars().collect();
    let mut cursor = 0;
    let mut words = Vec::with_capacity(parse.word_count());
    for (i, w) in parse.words().enumerate() {
        let (start, end) = match w.offsets {
            Some(r) => r,
            None => {
                let form: Vec<char> = w.form.chars().collect();
                let found = (cursor..=chars.len().saturating_sub(form.len()))
                    .find(|&s| !form.is_empty() && chars[s..s + form.len()] == form[..]);
                let s = found.ok_or_else(|| PipelineError::FormNotFound {
                    id: id.to_owned(),
                    word: i,
                    form: w.form.clone(),
                })?;
                (s, s + form.len())
            }
        };
        cursor = end;
        words.push(Word::new(w.form.clone(), start, end));
    }
    debug_assert!(words.iter().all(|w| w.char_end <= char_len(text)));
    Ok(words)
}

/// Labels, aligns, builds the token graph and attaches embeddings for one row.
///
/// Words come from the tokenization when given, otherwise from the parse with
/// one token per word. POS tags always come from the parse.
pub fn prepare_example(
    raw: &RawExample,
    tokenized: Option<&TokenizedDoc>,
    parse: &ParsedDoc,
    provider: &EmbeddingProvider,
    config: &ModelConfig,
    pos_column: PosColumn,
) -> Result<PreparedExample, PipelineError> {
    let (mut words, pieces, map) = match tokenized {
        Some(t) => (t.words(), t.pieces(), t.token_to_word()),
        None => {
            let words = words_from_parse(&raw.id, &raw.text, parse)?;
            let pieces = words.iter().map(|w| w.surface.clone()).collect();
            let map = (0..words.len()).collect();
            (words, pieces, map)
        }
    };
    if words.len() != parse.word_count() {
        return Err(PipelineError::WordCount {
            id: raw.id.clone(),
            words: words.len(),
            parsed: parse.word_count(),
        });
    }
    for (w, tag) in words.iter_mut().zip(parse.pos_tags(pos_column)) {
        w.pos = (tag != "_" && !tag.is_empty()).then_some(tag);
    }
    let (cause, effect) = locate_spans(raw)?;
    let words = encode_bio(&raw.id, words, cause, effect)?;
    let example: LabeledExample = align_to_tokens(&raw.id, &raw.text, words, &pieces, &map, config.max_seq_len)?;
    let keep = example.tokens.len();
    let graph = build_token_graph(&parse.arcs(), &map)?.truncated(keep);
    let embeddings = provider.embed(&raw.id, &pieces, keep)?;
    if embeddings.cols() != config.d_bert && keep > 0 {
        return Err(EmbeddingError::Dimension {
            expected: config.d_bert,
            found: embeddings.cols(),
        }
        .into());
    }
    Ok(PreparedExample::new(example, graph, embeddings)?)
}

/// Prepares every row, collecting all failures rather than stopping at the
/// first.
pub fn prepare_dataset(
    rows: &[RawExample],
    tokenization: Option<&HashMap<String, TokenizedDoc>>,
    parses: &HashMap<String, ParsedDoc>,
    provider: &EmbeddingProvider,
    config: &ModelConfig,
    pos_column: PosColumn,
) -> Result<Vec<PreparedExample>, Vec<PipelineError>> {
    let mut ok = Vec::with_capacity(rows.len());
    let mut errors = Vec::new();
    for raw in rows {
        let result = (|| {
            let parse = parses
                .get(&raw.id)
                .ok_or_else(|| PipelineError::MissingParse(raw.id.clone()))?;
            let tok = match tokenization {
                Some(map) => Some(
                    map.get(&raw.id)
                        .ok_or_else(|| PipelineError::MissingTokenization(raw.id.clone()))?,
                ),
                None => None,
            };
            prepare_example(raw, tok, parse, provider, config, pos_column)
        })();
        match result {
            Ok(p) => ok.push(p),
            Err(e) => errors.push(e),
        }
    }
    if errors.is_empty() {
        Ok(ok)
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabelTag::*;
    use crate::depgraph::{parse_conllu, DocGrouping};

    const DOC: &str = "# newdoc id = d1\n\
1\tProfits\tprofit\tNOUN\tNNS\t_\t2\tnsubj\t_\t_\n\
2\tfell\tfall\tVERB\tVBD\t_\t0\troot\t_\t_\n\
3\tbecause\tbecause\tSCONJ\tIN\t_\t5\tmark\t_\t_\n\
4\tweak\tweak\tADJ\t_\t_\t5\tamod\t_\t_\n\
5\tdemand\tdemand\tNOUN\tNN\t_\t2\tadvcl\t_\tSpaceAfter=No\n\
6\t.\t.\tPUNCT\t.\t_\t2\tpunct\t_\t_\n\n";

    fn setup() -> (RawExample, ParsedDoc) {
        let raw = RawExample::new("d1", "Profits fell because weak demand.").with_spans("weak demand", "Profits fell");
        let doc = parse_conllu(DOC.as_bytes(), DocGrouping::DocIdComment).unwrap().remove(0);
        (raw, doc)
    }

    fn small() -> ModelConfig {
        ModelConfig {
            d_bert: 4,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn words_placed_by_search() {
        let (raw, doc) = setup();
        let w = words_from_parse("d1", &raw.text, &doc).unwrap();
        assert_eq!((w[5].char_start, w[5].char_end), (32, 33));
        assert_eq!((w[4].char_start, w[4].char_end), (26, 32));
    }

    #[test]
    fn prepares_from_parse_alone() {
        let (raw, doc) = setup();
        let p = prepare_example(&raw, None, &doc, &EmbeddingProvider::Hashed { dim: 4 }, &small(), PosColumn::Xpos)
            .unwrap();
        assert_eq!(
            p.example.token_labels,
            [BeginEffect, InsideEffect, Outside, BeginCause, InsideCause, Outside]
        );
        assert_eq!(p.graph.edges, vec![(1, 0), (1, 4), (1, 5), (4, 2), (4, 3)]);
        assert_eq!(p.embeddings.shape(), &[6, 4]);
        // XPOS "_" falls back to UPOS
        assert_eq!(p.example.words[3].pos.as_deref(), Some("ADJ"));
        assert_eq!(p.example.words[4].pos.as_deref(), Some("NN"));
    }

    #[test]
    fn subword_tokenization_expands_edges() {
        let (raw, doc) = setup();
        let words = words_from_parse("d1", &raw.text, &doc).unwrap();
        let mut pieces = Vec::new();
        let mut map = Vec::new();
        for (i, w) in words.iter().enumerate() {
            if w.surface == "Profits" {
                pieces.extend(["Pro".to_string(), "##fits".to_string()]);
                map.extend([i, i]);
            } else {
                pieces.push(w.surface.clone());
                map.push(i);
            }
        }
        let tok = TokenizedDoc::from_words("d1", &words, &pieces, &map);
        let p = prepare_example(&raw, Some(&tok), &doc, &EmbeddingProvider::Hashed { dim: 4 }, &small(), PosColumn::Xpos)
            .unwrap();
        assert_eq!(p.example.token_labels[..3], [BeginEffect, InsideEffect, InsideEffect]);
        // fell → both pieces of Profits
        assert!(p.graph.edges.contains(&(2, 0)) && p.graph.edges.contains(&(2, 1)));
    }

    #[test]
    fn errors_collected() {
        let (raw, doc) = setup();
        let mut other = raw.clone();
        other.id = "d2".into();
        let parses = index_parses(vec![doc], std::slice::from_ref(&raw)).unwrap();
        let errs = prepare_dataset(
            &[raw, other.clone(), other],
            None,
            &parses,
            &EmbeddingProvider::Hashed { dim: 4 },
            &small(),
            PosColumn::Xpos,
        )
        .unwrap_err();
        assert_eq!(errs.len(), 2);
        assert!(matches!(errs[0], PipelineError::MissingParse(_)));
    }

    #[test]
    fn unnamed_parses_match_by_position() {
        let (raw, mut doc) = setup();
        doc.id = None;
        let m = index_parses(vec![doc.clone()], std::slice::from_ref(&raw)).unwrap();
        assert!(m.contains_key("d1"));
        assert!(index_parses(vec![doc.clone(), doc], &[raw]).is_err());
    }
}
