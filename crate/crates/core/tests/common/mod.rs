#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use ces_core::corpus::{whitespace_words, RawExample};
use ces_core::depgraph::{ConlluSentence, ConlluWord, DepArc, ParsedDoc, PosColumn};
use ces_core::model::{EmbeddingProvider, ModelConfig, PreparedExample};
use ces_core::pipeline::{index_parses, prepare_dataset};
use ces_core::synthetic::synthetic_corpus;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const LETTERS: &[char] = &['a', 'e', 'k', 'm', 'r', 's', 't', 'u', 'é', 'ß', 'ж', 'ø'];

fn word(rng: &mut impl Rng) -> String {
    let len = rng.random_range(2..9);
    (0..len).map(|_| LETTERS[rng.random_range(0..LETTERS.len())]).collect()
}

/// Distinct words, none a substring of another.
pub fn vocabulary(rng: &mut impl Rng, n: usize) -> Vec<String> {
    let mut words: Vec<String> = Vec::with_capacity(n);
    while words.len() < n {
        let w = word(rng);
        if words.iter().all(|v| !v.contains(&w) && !w.contains(v.as_str())) {
            words.push(w);
        }
    }
    words
}

/// A random document with disjoint cause and effect word runs, returned with
/// random subword pieces and the token→word map.
pub struct BioDoc {
    pub raw: RawExample,
    pub pieces: Vec<String>,
    pub token_to_word: Vec<usize>,
}

pub fn bio_doc(rng: &mut impl Rng, id: usize) -> BioDoc {
    let n = rng.random_range(2..16);
    let words = vocabulary(rng, n);
    let mut text = words.join(" ");
    if rng.random_bool(0.5) {
        text.push('.');
    }
    let run = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| -> Option<(usize, usize)> {
        if lo >= hi || rng.random_bool(0.1) {
            return None;
        }
        let a = rng.random_range(lo..hi);
        let b = rng.random_range(a..hi);
        Some((a, b))
    };
    let mut local = ChaCha8Rng::seed_from_u64(rng.random());
    let split = local.random_range(0..=n);
    let (first, second) = (run(&mut local, 0, split), run(&mut local, split, n));
    let phrase = |r: Option<(usize, usize)>| r.map_or_else(String::new, |(a, b)| words[a..=b].join(" "));
    let (cause, effect) = if local.random_bool(0.5) {
        (phrase(first), phrase(second))
    } else {
        (phrase(second), phrase(first))
    };
    let raw = RawExample::new(format!("doc.{id}"), text.clone()).with_spans(cause, effect);
    let mut pieces = Vec::new();
    let mut token_to_word = Vec::new();
    for (w, ww) in whitespace_words(&text).iter().enumerate() {
        let chars: Vec<char> = ww.surface.chars().collect();
        let k = rng.random_range(1..=chars.len().min(3));
        let mut cuts: Vec<usize> = (1..chars.len()).collect();
        cuts.shuffle(rng);
        let mut cuts: Vec<usize> = cuts.into_iter().take(k - 1).collect();
        cuts.sort_unstable();
        let mut start = 0;
        for end in cuts.into_iter().chain([chars.len()]) {
            let piece: String = chars[start..end].iter().collect();
            pieces.push(if start == 0 { piece } else { format!("##{piece}") });
            token_to_word.push(w);
            start = end;
        }
    }
    BioDoc {
        raw,
        pieces,
        token_to_word,
    }
}

/// Random dependency trees for `sentences` sentences in one document.
pub fn random_parse(rng: &mut impl Rng, sentences: usize, max_words: usize) -> ParsedDoc {
    let mut doc = ParsedDoc {
        id: Some("p".into()),
        sentences: Vec::new(),
    };
    for _ in 0..sentences {
        let m = rng.random_range(1..=max_words);
        let mut order: Vec<usize> = (1..=m).collect();
        order.shuffle(rng);
        let mut heads = vec![0; m + 1];
        for i in 1..m {
            heads[order[i]] = order[rng.random_range(0..i)];
        }
        doc.sentences.push(ConlluSentence {
            words: (1..=m)
                .map(|i| ConlluWord {
                    form: format!("w{i}"),
                    upos: "X".into(),
                    xpos: "_".into(),
                    head: heads[i],
                    deprel: "dep".into(),
                    offsets: None,
                })
                .collect(),
        });
    }
    doc
}

/// One to three pieces per word.
pub fn random_split(rng: &mut impl Rng, words: usize) -> Vec<usize> {
    (0..words).flat_map(|w| std::iter::repeat_n(w, rng.random_range(1..=3))).collect()
}

/// Naive expansion: every head piece to every tail piece, deduplicated.
pub fn expanded_edges(arcs: &[DepArc], token_to_word: &[usize]) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for arc in arcs {
        for (i, &wi) in token_to_word.iter().enumerate() {
            for (j, &wj) in token_to_word.iter().enumerate() {
                if wi == arc.head && wj == arc.tail {
                    out.insert((i, j));
                }
            }
        }
    }
    out
}

/// The generated corpus prepared with hashed embeddings.
pub fn synthetic_examples(n: usize, seed: u64, config: &ModelConfig) -> Vec<PreparedExample> {
    let docs = synthetic_corpus(n, seed);
    let rows: Vec<RawExample> = docs.iter().map(|d| d.raw.clone()).collect();
    let parses = index_parses(docs.iter().map(|d| d.parse.clone()).collect(), &rows).unwrap();
    let tokenization: HashMap<_, _> = docs.iter().map(|d| (d.raw.id.clone(), d.tokenized.clone())).collect();
    let provider = EmbeddingProvider::Hashed { dim: config.d_bert };
    prepare_dataset(&rows, Some(&tokenization), &parses, &provider, config, PosColumn::Xpos).unwrap()
}
