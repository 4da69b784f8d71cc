//! A small generated corpus with planted cause/effect patterns, consistent
//! dependency parses and subword splits, for tests and demos.

use rand::Rng;

use crate::corpus::{whitespace_words, RawExample, TokenizedDoc};
use crate::depgraph::{ConlluSentence, ConlluWord, ParsedDoc};
use crate::rng::stream;

const CAUSE_ADJ: &[&str] = &["weak", "rising", "strong", "volatile", "sluggish", "unexpected"];
const CAUSE_NOUN: &[&str] = &["demand", "inflation", "competition", "tariffs", "borrowing", "regulation", "oversupply"];
const EFFECT_NOUN: &[&str] = &["profits", "shares", "revenue", "earnings", "margins", "output", "dividends"];
const EFFECT_VERB: &[&str] = &["fell", "rose", "slumped", "declined", "improved", "stalled"];
const EFFECT_ADV: &[&str] = &["sharply", "slightly", "steadily", "abruptly"];
const EFFECT_ADJ: &[&str] = &["lower", "reduced", "record", "thinner"];
const PREFIX: &[(&str, &str)] = &[("Analysts", "said"), ("Officials", "noted"), ("Bankers", "warned")];

/// `(form, upos, xpos, head, deprel)` with 1-based heads.
type Row = (String, &'static str, &'static str, usize, &'static str);

/// Sentences containing no spans.
fn filler(k: usize) -> Vec<Row> {
    let rows: &[(&str, &str, &str, usize, &str)] = match k {
        0 => &[
            ("Trading", "NOUN", "NN", 3, "nsubj"),
            ("was", "AUX", "VBD", 3, "cop"),
            ("light", "ADJ", "JJ", 0, "root"),
            ("on", "ADP", "IN", 5, "case"),
            ("Monday", "PROPN", "NNP", 3, "obl"),
            (".", "PUNCT", ".", 3, "punct"),
        ],
        _ => &[
            ("The", "DET", "DT", 2, "det"),
            ("report", "NOUN", "NN", 4, "nsubj"),
            ("was", "AUX", "VBD", 4, "aux"),
            ("published", "VERB", "VBN", 0, "root"),
            ("today", "NOUN", "NN", 4, "obl"),
            (".", "PUNCT", ".", 4, "punct"),
        ],
    };
    rows.iter().map(|&(f, u, x, h, d)| (f.to_owned(), u, x, h, d)).collect()
}

/// Splits words longer than seven characters into two pieces.
pub fn split_pieces(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() > 7 {
        vec![chars[..4].iter().collect(), format!("##{}", chars[4..].iter().collect::<String>())]
    } else {
        vec![word.to_owned()]
    }
}

/// One generated document in all three input forms.
#[derive(Clone, Debug)]
pub struct SyntheticDoc {
    pub raw: RawExample,
    pub tokenized: TokenizedDoc,
    pub parse: ParsedDoc,
}

fn pick<'a>(rng: &mut impl Rng, items: &[&'a str]) -> &'a str {
    items[rng.random_range(0..items.len())]
}

/// Deterministic corpus of `n` documents.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<SyntheticDoc> {
    let mut rng = stream(seed, "synthetic");
    (0..n).map(|i| generate(i, &mut rng)).collect()
}

fn generate(i: usize, rng: &mut impl Rng) -> SyntheticDoc {
    let id = format!("syn.{i:04}");
    let mut rows: Vec<Row> = Vec::new();
    let prefix = rng.random_bool(0.3).then(|| PREFIX[rng.random_range(0..PREFIX.len())]);
    if let Some((subj, verb)) = prefix {
        rows.push((subj.into(), "NOUN", "NNS", 2, "nsubj"));
        rows.push((verb.into(), "VERB", "VBD", 0, "root"));
    }
    let base = rows.len();
    let (main_head, main_rel) = if prefix.is_some() { (2, "ccomp") } else { (0, "root") };
    let cause_adj = rng.random_bool(0.5).then(|| pick(rng, CAUSE_ADJ));
    let cause_noun = pick(rng, CAUSE_NOUN);
    let (cause, effect);

    if rng.random_bool(0.5) {
        // effect because cause
        let noun = pick(rng, EFFECT_NOUN);
        let verb = pick(rng, EFFECT_VERB);
        let adv = rng.random_bool(0.5).then(|| pick(rng, EFFECT_ADV));
        let v = base + 2;
        rows.push((noun.into(), "NOUN", "NNS", v, "nsubj"));
        rows.push((verb.into(), "VERB", "VBD", main_head, main_rel));
        if let Some(a) = adv {
            rows.push((a.into(), "ADV", "RB", v, "advmod"));
        }
        let c_noun = rows.len() + 2 + usize::from(cause_adj.is_some());
        rows.push(("because".into(), "SCONJ", "IN", c_noun, "mark"));
        if let Some(a) = cause_adj {
            rows.push((a.into(), "ADJ", "JJ", c_noun, "amod"));
        }
        rows.push((cause_noun.into(), "NOUN", "NN", v, "advcl"));
        rows.push((".".into(), "PUNCT", ".", v, "punct"));
        effect = [Some(noun), Some(verb), adv].into_iter().flatten().collect::<Vec<_>>().join(" ");
        cause = [cause_adj, Some(cause_noun)].into_iter().flatten().collect::<Vec<_>>().join(" ");
    } else {
        // cause led to effect
        let e_adj = rng.random_bool(0.5).then(|| pick(rng, EFFECT_ADJ));
        let e_noun = pick(rng, EFFECT_NOUN);
        let c_noun = base + 1 + usize::from(cause_adj.is_some());
        let led = c_noun + 1;
        if let Some(a) = cause_adj {
            rows.push((a.into(), "ADJ", "JJ", c_noun, "amod"));
        }
        rows.push((cause_noun.into(), "NOUN", "NN", led, "nsubj"));
        rows.push(("led".into(), "VERB", "VBD", main_head, main_rel));
        let e = led + 2 + usize::from(e_adj.is_some());
        rows.push(("to".into(), "ADP", "TO", e, "case"));
        if let Some(a) = e_adj {
            rows.push((a.into(), "ADJ", "JJ", e, "amod"));
        }
        rows.push((e_noun.into(), "NOUN", "NNS", led, "obl"));
        rows.push((".".into(), "PUNCT", ".", led, "punct"));
        cause = [cause_adj, Some(cause_noun)].into_iter().flatten().collect::<Vec<_>>().join(" ");
        effect = [e_adj, Some(e_noun)].into_iter().flatten().collect::<Vec<_>>().join(" ");
    }
    let mut sentences = vec![rows];
    if rng.random_bool(0.3) {
        sentences.push(filler(rng.random_range(0..2)));
    }

    let text = sentences
        .iter()
        .map(|s| {
            let words: Vec<&str> = s.iter().map(|r| r.0.as_str()).collect();
            words.join(" ").replace(" .", ".")
        })
        .collect::<Vec<_>>()
        .join(" ");
    let words = whitespace_words(&text);
    let mut pieces = Vec::new();
    let mut map = Vec::new();
    for (w, word) in words.iter().enumerate() {
        for p in split_pieces(&word.surface) {
            pieces.push(p);
            map.push(w);
        }
    }
    let mut offsets = words.iter().map(|w| (w.char_start, w.char_end));
    let parse = ParsedDoc {
        id: Some(id.clone()),
        sentences: sentences
            .into_iter()
            .map(|s| ConlluSentence {
                words: s
                    .into_iter()
                    .map(|(form, upos, xpos, head, deprel)| ConlluWord {
                        form,
                        upos: upos.into(),
                        xpos: xpos.into(),
                        head,
                        deprel: deprel.into(),
                        offsets: offsets.next(),
                    })
                    .collect(),
            })
            .collect(),
    };
    SyntheticDoc {
        raw: RawExample::new(id.clone(), text).with_spans(cause, effect),
        tokenized: TokenizedDoc::from_words(id, &words, &pieces, &map),
        parse,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::locate_spans;

    #[test]
    fn documents_are_consistent() {
        for d in synthetic_corpus(200, 5) {
            assert_eq!(d.tokenized.words.len(), d.parse.word_count(), "{}", d.raw.text);
            for (w, p) in d.tokenized.words.iter().zip(d.parse.words()) {
                assert_eq!(w.surface, p.form);
            }
            let (c, e) = locate_spans(&d.raw).unwrap();
            assert!(c.is_some() && e.is_some());
            // one root per sentence, every head inside its sentence
            for s in &d.parse.sentences {
                assert_eq!(s.words.iter().filter(|w| w.head == 0).count(), 1, "{}", d.raw.text);
                assert!(s.words.iter().all(|w| w.head <= s.words.len()));
            }
        }
    }

    #[test]
    fn deterministic_and_split() {
        let a = synthetic_corpus(10, 1);
        let b = synthetic_corpus(10, 1);
        assert!(a.iter().zip(&b).all(|(x, y)| x.raw == y.raw && x.parse == y.parse));
        assert_eq!(split_pieces("competition"), ["comp", "##etition"]);
        assert_eq!(split_pieces("profits"), ["profits"]);
    }
}
