//! Dependency parses turned into directed graphs over subword tokens.

mod conllu;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use conllu::{
    parse_conllu, write_conllu, ConlluSentence, ConlluWord, DocGrouping, ParsedDoc, PosColumn,
};

use crate::corpus::SpanType;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("CoNLL-U line {line}: {message}")]
    Conllu { line: usize, message: String },
    #[error("arc references word {word}, which has no tokens")]
    WordWithoutTokens { word: usize },
    #[error("arc {head}->{tail} is a self-loop")]
    SelfLoop { head: usize, tail: usize },
    #[error("homophily is undefined on a graph without edges")]
    NoEdges,
    #[error("{labels} labels for {nodes} nodes")]
    LabelCount { labels: usize, nodes: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A word-level dependency, oriented head → tail.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DepArc {
    pub head: usize,
    pub tail: usize,
    pub relation: String,
}

/// How messages travel along stored head→tail edges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeDirection {
    /// A node aggregates from its heads.
    #[default]
    HeadToTail,
    /// A node aggregates from its tails.
    TailToHead,
    Symmetric,
}

/// Directed token graph. Edges are sorted, unique and loop-free.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenGraph {
    pub n_nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

/// Expands each word arc `h → t` to every (piece of `h`, piece of `t`) pair.
pub fn build_token_graph(arcs: &[DepArc], token_to_word: &[usize]) -> Result<TokenGraph, GraphError> {
    let n_words = token_to_word.iter().max().map_or(0, |&w| w + 1);
    let mut pieces: Vec<Vec<usize>> = vec![Vec::new(); n_words];
    for (t, &w) in token_to_word.iter().enumerate() {
        pieces[w].push(t);
    }
    let of = |w: usize| -> Result<&[usize], GraphError> {
        pieces
            .get(w)
            .filter(|p| !p.is_empty())
            .map(Vec::as_slice)
            .ok_or(GraphError::WordWithoutTokens { word: w })
    };

    let mut edges = BTreeSet::new();
    for arc in arcs {
        if arc.head == arc.tail {
            return Err(GraphError::SelfLoop {
                head: arc.head,
                tail: arc.tail,
            });
        }
        for &i in of(arc.head)? {
            for &j in of(arc.tail)? {
                edges.insert((i, j));
            }
        }
    }
    Ok(TokenGraph {
        n_nodes: token_to_word.len(),
        edges: edges.into_iter().collect(),
    })
}

impl TokenGraph {
    /// Drops nodes at or past `n` and their edges.
    pub fn truncated(&self, n: usize) -> TokenGraph {
        TokenGraph {
            n_nodes: self.n_nodes.min(n),
            edges: self.edges.iter().copied().filter(|&(a, b)| a < n && b < n).collect(),
        }
    }

    /// Source lists per destination node under `direction`.
    pub fn in_neighbors(&self, direction: EdgeDirection) -> Vec<Vec<usize>> {
        let mut lists: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.n_nodes];
        for &(src, dst) in &self.edges {
            match direction {
                EdgeDirection::HeadToTail => {
                    lists[dst].insert(src);
                }
                EdgeDirection::TailToHead => {
                    lists[src].insert(dst);
                }
                EdgeDirection::Symmetric => {
                    lists[dst].insert(src);
                    lists[src].insert(dst);
                }
            }
        }
        lists.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    pub fn in_degree(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes];
        for &(_, dst) in &self.edges {
            deg[dst] += 1;
        }
        deg
    }

    /// Number of weakly connected components (isolated nodes count).
    pub fn weak_components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.n_nodes).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = self.n_nodes;
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                components -= 1;
            }
        }
        components
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n_nodes": self.n_nodes,
            "edges": self.edges.iter().map(|&(a, b)| [a, b]).collect::<Vec<_>>(),
        })
    }
}

/// Same-label edge counts used by [`homophily_score`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeAgreement {
    pub same: usize,
    pub total: usize,
}

pub fn edge_agreement(graph: &TokenGraph, labels: &[SpanType]) -> Result<EdgeAgreement, GraphError> {
    if labels.len() != graph.n_nodes {
        return Err(GraphError::LabelCount {
            labels: labels.len(),
            nodes: graph.n_nodes,
        });
    }
    let same = graph
        .edges
        .iter()
        .filter(|&&(a, b)| labels[a] == labels[b])
        .count();
    Ok(EdgeAgreement {
        same,
        total: graph.edges.len(),
    })
}

/// Fraction of edges whose endpoints share a collapsed label.
pub fn homophily_score(graph: &TokenGraph, labels: &[SpanType]) -> Result<f64, GraphError> {
    let agreement = edge_agreement(graph, labels)?;
    if agreement.total == 0 {
        return Err(GraphError::NoEdges);
    }
    Ok(agreement.same as f64 / agreement.total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use SpanType::*;

    fn arc(head: usize, tail: usize) -> DepArc {
        DepArc {
            head,
            tail,
            relation: "dep".into(),
        }
    }

    #[test]
    fn head_pieces_times_tail_pieces() {
        // w0 → tokens {0,1}, w1 → {2}; arc w1 → w0
        let g = build_token_graph(&[arc(1, 0)], &[0, 0, 1]).unwrap();
        assert_eq!(g.edges, vec![(2, 0), (2, 1)]);

        let g = build_token_graph(&[arc(0, 1)], &[0, 0, 1, 1]).unwrap();
        assert_eq!(g.edges.len(), 4);
    }

    #[test]
    fn one_token_per_word() {
        let g = build_token_graph(&[arc(1, 0), arc(1, 2)], &[0, 1, 2]).unwrap();
        assert_eq!(g.edges, vec![(1, 0), (1, 2)]);
        assert_eq!(g.in_degree(), vec![1, 0, 1]);
    }

    #[test]
    fn duplicates_removed_and_order_independent() {
        let a = build_token_graph(&[arc(1, 0), arc(1, 2), arc(1, 0)], &[0, 1, 2]).unwrap();
        let b = build_token_graph(&[arc(1, 2), arc(1, 0)], &[0, 1, 2]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn arc_to_word_without_tokens() {
        let err = build_token_graph(&[arc(0, 3)], &[0, 1]).unwrap_err();
        assert!(matches!(err, GraphError::WordWithoutTokens { word: 3 }));
    }

    #[test]
    fn homophily_examples() {
        let g = build_token_graph(&[arc(1, 0), arc(1, 2)], &[0, 1, 2]).unwrap();
        assert_eq!(homophily_score(&g, &[Cause, Cause, Cause]).unwrap(), 1.0);
        assert_eq!(homophily_score(&g, &[Cause, Cause, Effect]).unwrap(), 0.5);

        let star = build_token_graph(&[arc(0, 1), arc(0, 2), arc(0, 3)], &[0, 1, 2, 3]).unwrap();
        assert_eq!(homophily_score(&star, &[Effect, Cause, Cause, Cause]).unwrap(), 0.0);

        let empty = TokenGraph {
            n_nodes: 2,
            edges: vec![],
        };
        assert!(matches!(homophily_score(&empty, &[Other, Other]), Err(GraphError::NoEdges)));
    }

    #[test]
    fn directions() {
        let g = build_token_graph(&[arc(1, 0)], &[0, 1]).unwrap();
        assert_eq!(g.in_neighbors(EdgeDirection::HeadToTail), vec![vec![1], vec![]]);
        assert_eq!(g.in_neighbors(EdgeDirection::TailToHead), vec![vec![], vec![0]]);
        assert_eq!(g.in_neighbors(EdgeDirection::Symmetric), vec![vec![1], vec![0]]);
    }

    #[test]
    fn truncation_and_components() {
        let g = build_token_graph(&[arc(1, 0), arc(3, 2)], &[0, 1, 2, 3]).unwrap();
        assert_eq!(g.weak_components(), 2);
        let t = g.truncated(3);
        assert_eq!(t.n_nodes, 3);
        assert_eq!(t.edges, vec![(1, 0)]);
        assert_eq!(t.weak_components(), 2);
        assert_eq!(g.to_json()["edges"][1], serde_json::json!([3, 2]));
    }
}
