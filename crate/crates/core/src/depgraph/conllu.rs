//! CoNLL-U reader.
//!
//! Only the fields the pipeline needs are kept: FORM, UPOS, XPOS, HEAD,
//! DEPREL and character offsets from MISC (`start_char`/`end_char` or
//! `TokenRange`). Multi-word token ranges and empty nodes are skipped.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::{DepArc, GraphError};

/// How sentences are grouped into documents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DocGrouping {
    /// A `# newdoc id = ...` comment opens each document.
    #[default]
    DocIdComment,
    /// The whole input is a single document.
    WholeFile,
}

/// Which column feeds the POS features.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PosColumn {
    Upos,
    /// XPOS, falling back to UPOS where XPOS is `_`.
    #[default]
    Xpos,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConlluWord {
    pub form: String,
    pub upos: String,
    pub xpos: String,
    /// 1-based within the sentence, 0 for the root.
    pub head: usize,
    pub deprel: String,
    pub offsets: Option<(usize, usize)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConlluSentence {
    pub words: Vec<ConlluWord>,
}

/// A parsed document: sentences sharing one word index space.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedDoc {
    pub id: Option<String>,
    pub sentences: Vec<ConlluSentence>,
}

impl ParsedDoc {
    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(|s| s.words.len()).sum()
    }

    pub fn words(&self) -> impl Iterator<Item = &ConlluWord> {
        self.sentences.iter().flat_map(|s| &s.words)
    }

    /// Word index range of each sentence.
    pub fn sentence_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut offset = 0;
        self.sentences
            .iter()
            .map(|s| {
                let r = offset..offset + s.words.len();
                offset = r.end;
                r
            })
            .collect()
    }

    /// Head→tail arcs over 0-based document word indices; root attachments
    /// produce no arc.
    pub fn arcs(&self) -> Vec<DepArc> {
        let mut arcs = Vec::new();
        let mut offset = 0;
        for s in &self.sentences {
            for (i, w) in s.words.iter().enumerate() {
                if w.head > 0 {
                    arcs.push(DepArc {
                        head: offset + w.head - 1,
                        tail: offset + i,
                        relation: w.deprel.clone(),
                    });
                }
            }
            offset += s.words.len();
        }
        arcs
    }

    pub fn pos_tags(&self, column: PosColumn) -> Vec<String> {
        self.words()
            .map(|w| match column {
                PosColumn::Upos => w.upos.clone(),
                PosColumn::Xpos if w.xpos != "_" => w.xpos.clone(),
                PosColumn::Xpos => w.upos.clone(),
            })
            .collect()
    }
}

fn doc_id_from_comment(comment: &str) -> Option<String> {
    let body = comment.trim_start_matches('#').trim();
    for key in ["newdoc id", "doc_id", "newdoc_id"] {
        if let Some(rest) = body.strip_prefix(key) {
            let rest = rest.trim_start();
            if let Some(v) = rest.strip_prefix('=') {
                return Some(v.trim().to_owned());
            }
        }
    }
    None
}

fn parse_offsets(misc: &str) -> Option<(usize, usize)> {
    let mut start = None;
    let mut end = None;
    for item in misc.split('|') {
        if let Some(v) = item.strip_prefix("start_char=") {
            start = v.parse().ok();
        } else if let Some(v) = item.strip_prefix("end_char=") {
            end = v.parse().ok();
        } else if let Some(v) = item.strip_prefix("TokenRange=") {
            let (a, b) = v.split_once(':')?;
            return Some((a.parse().ok()?, b.parse().ok()?));
        }
    }
    Some((start?, end?))
}

struct Builder {
    docs: Vec<ParsedDoc>,
    current: Option<ParsedDoc>,
    sentence: ConlluSentence,
    sentence_line: usize,
    grouping: DocGrouping,
}

impl Builder {
    fn finish_sentence(&mut self) -> Result<(), GraphError> {
        if self.sentence.words.is_empty() {
            return Ok(());
        }
        let n = self.sentence.words.len();
        for w in &self.sentence.words {
            if w.head > n {
                return Err(GraphError::Conllu {
                    line: self.sentence_line,
                    message: format!("HEAD {} out of range for a {n}-word sentence", w.head),
                });
            }
        }
        let doc = match (&mut self.current, self.grouping) {
            (Some(doc), _) => doc,
            (None, DocGrouping::WholeFile) => self.current.insert(ParsedDoc::default()),
            (None, DocGrouping::DocIdComment) => {
                return Err(GraphError::Conllu {
                    line: self.sentence_line,
                    message: "sentence outside any `# newdoc id` document".into(),
                })
            }
        };
        doc.sentences.push(std::mem::take(&mut self.sentence));
        Ok(())
    }
}

pub fn parse_conllu(source: impl BufRead, grouping: DocGrouping) -> Result<Vec<ParsedDoc>, GraphError> {
    let mut b = Builder {
        docs: Vec::new(),
        current: None,
        sentence: ConlluSentence::default(),
        sentence_line: 0,
        grouping,
    };
    for (i, line) in source.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            b.finish_sentence()?;
            continue;
        }
        if line.starts_with('#') {
            if grouping == DocGrouping::DocIdComment {
                if let Some(id) = doc_id_from_comment(line) {
                    b.finish_sentence()?;
                    if let Some(doc) = b.current.take() {
                        b.docs.push(doc);
                    }
                    b.current = Some(ParsedDoc {
                        id: Some(id),
                        sentences: Vec::new(),
                    });
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(GraphError::Conllu {
                line: lineno,
                message: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let id: usize = id.parse().map_err(|_| GraphError::Conllu {
            line: lineno,
            message: format!("ID {id:?} is not an integer"),
        })?;
        if b.sentence.words.is_empty() {
            b.sentence_line = lineno;
        }
        if id != b.sentence.words.len() + 1 {
            return Err(GraphError::Conllu {
                line: lineno,
                message: format!("ID {id} out of sequence"),
            });
        }
        let head: usize = cols[6].parse().map_err(|_| GraphError::Conllu {
            line: lineno,
            message: format!("HEAD {:?} is not an integer", cols[6]),
        })?;
        if head == id {
            return Err(GraphError::Conllu {
                line: lineno,
                message: "word is its own head".into(),
            });
        }
        b.sentence.words.push(ConlluWord {
            form: cols[1].to_owned(),
            upos: cols[3].to_owned(),
            xpos: cols[4].to_owned(),
            head,
            deprel: cols[7].to_owned(),
            offsets: parse_offsets(cols[9]),
        });
    }
    b.finish_sentence()?;
    if let Some(doc) = b.current.take() {
        b.docs.push(doc);
    }
    Ok(b.docs)
}

/// Renders documents back to CoNLL-U (unused columns as `_`).
pub fn write_conllu(docs: &[ParsedDoc]) -> String {
    let mut out = String::new();
    for doc in docs {
        if let Some(id) = &doc.id {
            out.push_str(&format!("# newdoc id = {id}\n"));
        }
        for s in &doc.sentences {
            for (i, w) in s.words.iter().enumerate() {
                let misc = w
                    .offsets
                    .map_or_else(|| "_".to_owned(), |(a, b)| format!("start_char={a}|end_char={b}"));
                out.push_str(&format!(
                    "{}\t{}\t_\t{}\t{}\t_\t{}\t{}\t_\t{}\n",
                    i + 1,
                    w.form,
                    w.upos,
                    w.xpos,
                    w.head,
                    w.deprel,
                    misc
                ));
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: usize, form: &str, head: usize) -> String {
        format!("{id}\t{form}\t{form}\tX\tXX\t_\t{head}\tdep\t_\t_\n")
    }

    fn sentence(heads: &[usize]) -> String {
        let mut s = String::new();
        for (i, &h) in heads.iter().enumerate() {
            s.push_str(&row(i + 1, &format!("w{}", i + 1), h));
        }
        s.push('\n');
        s
    }

    fn arcs_of(heads: &[usize]) -> Vec<(usize, usize)> {
        let src = format!("# newdoc id = d\n{}", sentence(heads));
        let docs = parse_conllu(src.as_bytes(), DocGrouping::DocIdComment).unwrap();
        docs[0].arcs().iter().map(|a| (a.head, a.tail)).collect()
    }

    #[test]
    fn two_word_sentence() {
        // HEADs [2, 0]: word 2 heads word 1 (1-based) → (1, 0) 0-based
        assert_eq!(arcs_of(&[2, 0]), vec![(1, 0)]);
    }

    #[test]
    fn three_word_sentence() {
        assert_eq!(arcs_of(&[2, 0, 2]), vec![(1, 0), (1, 2)]);
    }

    #[test]
    fn multi_sentence_shares_index_space() {
        let src = format!("# newdoc id = d\n{}{}", sentence(&[2, 0]), sentence(&[0, 1]));
        let docs = parse_conllu(src.as_bytes(), DocGrouping::DocIdComment).unwrap();
        let arcs: Vec<_> = docs[0].arcs().iter().map(|a| (a.head, a.tail)).collect();
        assert_eq!(arcs, vec![(1, 0), (2, 3)]);
        assert_eq!(docs[0].sentence_ranges(), vec![0..2, 2..4]);
    }

    #[test]
    fn bad_heads_name_line() {
        let src = format!("# newdoc id = d\n{}{}", row(1, "a", 0), "2\tb\tb\tX\tXX\t_\tx\tdep\t_\t_\n");
        let err = parse_conllu(src.as_bytes(), DocGrouping::DocIdComment).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");

        let src = format!("# newdoc id = d\n{}{}\n", row(1, "a", 0), row(2, "b", 7));
        let err = parse_conllu(src.as_bytes(), DocGrouping::DocIdComment).unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");
    }

    #[test]
    fn documents_split_on_newdoc() {
        let src = format!(
            "# newdoc id = a\n{}# newdoc id = b\n# sent_id = 1\n{}",
            sentence(&[0]),
            sentence(&[2, 0])
        );
        let docs = parse_conllu(src.as_bytes(), DocGrouping::DocIdComment).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[1].id.as_deref(), Some("b"));
        assert_eq!(docs[1].word_count(), 2);
    }

    #[test]
    fn whole_file_grouping() {
        let src = format!("{}{}", sentence(&[0]), sentence(&[0]));
        let docs = parse_conllu(src.as_bytes(), DocGrouping::WholeFile).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].sentences.len(), 2);
        assert!(parse_conllu(src.as_bytes(), DocGrouping::DocIdComment).is_err());
    }

    #[test]
    fn skips_ranges_and_empty_nodes_and_reads_offsets() {
        let src = "# newdoc id = d\n\
                   1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n\
                   1\tdo\tdo\tAUX\tVBP\t_\t0\troot\t_\tstart_char=0|end_char=2\n\
                   1.1\tx\t_\t_\t_\t_\t_\t_\t_\t_\n\
                   2\tn't\tnot\tPART\tRB\t_\t1\tadvmod\t_\tTokenRange=2:5\n\n";
        let docs = parse_conllu(src.as_bytes(), DocGrouping::DocIdComment).unwrap();
        let words: Vec<_> = docs[0].words().collect();
        assert_eq!(words.len(), 2);
        assert_eq!(words[0].offsets, Some((0, 2)));
        assert_eq!(words[1].offsets, Some((2, 5)));
        assert_eq!(docs[0].pos_tags(PosColumn::Xpos), ["VBP", "RB"]);
        assert_eq!(docs[0].pos_tags(PosColumn::Upos), ["AUX", "PART"]);
    }

    #[test]
    fn write_then_parse() {
        let src = format!("# newdoc id = d\n{}", sentence(&[2, 0, 2]));
        let docs = parse_conllu(src.as_bytes(), DocGrouping::DocIdComment).unwrap();
        let again = parse_conllu(write_conllu(&docs).as_bytes(), DocGrouping::DocIdComment).unwrap();
        assert_eq!(docs[0].arcs(), again[0].arcs());
    }
}
