//! Sentence/entity graph of a single article.
//!
//! Rows `0..m` of the embedding matrix are sentences and rows `m..m+n` are
//! entities. Sentences are linked to their neighbors within a sliding
//! window; an entity is linked to every sentence that mentions it, which
//! puts any two sentences sharing an entity at most two hops apart.

use std::collections::BTreeSet;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::encoders::TextEncoder;
use crate::error::{Error, Result};
use crate::graph::NodeType;
use crate::text::{EntityTable, SentenceList};

/// How sentence nodes are linked to each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SentenceLinks {
    /// Pairs with `0 < |i - j| <= w`.
    Window(usize),
    /// Every pair of distinct sentences.
    Complete,
}

/// `{(i, j) : i < j, j - i <= w}` in ascending order.
pub fn local_edges(m: usize, w: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(local_edge_count(m, w));
    for i in 0..m {
        for j in i + 1..m.min(i.saturating_add(w).saturating_add(1)) {
            edges.push((i, j));
        }
    }
    edges
}

/// Closed form `sum_{g=1..w} max(0, m - g)`.
pub fn local_edge_count(m: usize, w: usize) -> usize {
    (1..=w.min(m)).map(|g| m - g).sum()
}

pub fn complete_edges(m: usize) -> Vec<(usize, usize)> {
    local_edges(m, m)
}

/// One `(sentence, entity)` edge per incidence pair.
pub fn global_edges(incidence: &BTreeSet<(usize, usize)>, m: usize, n: usize) -> Result<Vec<(usize, usize)>> {
    incidence
        .iter()
        .map(|&(i, j)| {
            if i >= m {
                Err(Error::IndexOutOfRange { what: "sentence", index: i, len: m })
            } else if j >= n {
                Err(Error::IndexOutOfRange { what: "entity", index: j, len: n })
            } else {
                Ok((i, j))
            }
        })
        .collect()
}

/// Encode sentences followed by entity surfaces: an `(m + n) x d` matrix.
pub fn init_semantic_nodes(
    sentences: &SentenceList,
    entities: &EntityTable,
    encoder: &dyn TextEncoder,
) -> Result<Array2<f64>> {
    if sentences.is_empty() {
        return Err(Error::EmptyText);
    }
    let texts: Vec<&str> = sentences
        .sentences
        .iter()
        .chain(&entities.entities)
        .map(String::as_str)
        .collect();
    let h = encoder.encode(&texts)?;
    if h.dim() != (texts.len(), encoder.dim()) {
        return Err(Error::ShapeMismatch(format!(
            "encoder returned {:?} for {} texts of dim {}",
            h.dim(),
            texts.len(),
            encoder.dim()
        )));
    }
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::Encoder("non-finite embedding".into()));
    }
    Ok(h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemanticGraph {
    pub m: usize,
    pub n: usize,
    pub embeddings: Array2<f64>,
    /// Unordered sentence pairs stored as `(i, j)` with `i < j`.
    pub edges_local: Vec<(usize, usize)>,
    /// `(sentence, entity)` pairs; entity `j` is node `m + j`.
    pub edges_global: Vec<(usize, usize)>,
    pub node_types: Vec<NodeType>,
}

impl SemanticGraph {
    /// Assemble from precomputed embeddings. With `use_entities == false`
    /// entity rows and edges are dropped.
    pub fn build(
        embeddings: &Array2<f64>,
        m: usize,
        incidence: &BTreeSet<(usize, usize)>,
        links: SentenceLinks,
        use_entities: bool,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyText);
        }
        if embeddings.nrows() < m {
            return Err(Error::ShapeMismatch(format!(
                "{} embedding rows for {m} sentences",
                embeddings.nrows()
            )));
        }
        let n_all = embeddings.nrows() - m;
        let (n, embeddings, edges_global) = if use_entities {
            (n_all, embeddings.clone(), global_edges(incidence, m, n_all)?)
        } else {
            (0, embeddings.slice(s![..m, ..]).to_owned(), Vec::new())
        };
        let edges_local = match links {
            SentenceLinks::Window(w) => local_edges(m, w),
            SentenceLinks::Complete => complete_edges(m),
        };
        let node_types = std::iter::repeat_n(NodeType::Sentence, m)
            .chain(std::iter::repeat_n(NodeType::Entity, n))
            .collect();
        Ok(SemanticGraph {
            m,
            n,
            embeddings,
            edges_local,
            edges_global,
            node_types,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.m + self.n
    }

    /// All edges as node-index pairs (entities offset by `m`).
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.edges_local
            .iter()
            .copied()
            .chain(self.edges_global.iter().map(|&(i, j)| (i, self.m + j)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::HashEncoder;
    use crate::graph::hop_distances;
    use crate::text::{extract_entities, CapitalizedRecognizer};

    #[test]
    fn window_examples() {
        assert_eq!(local_edges(3, 1), vec![(0, 1), (1, 2)]);
        let mut e = local_edges(5, 2);
        e.sort_by_key(|&(i, j)| (j - i, i));
        assert_eq!(e, vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 2), (1, 3), (2, 4)]);
        assert!(local_edges(1, 7).is_empty());
        assert!(local_edges(4, 0).is_empty());
        assert_eq!(local_edges(3, usize::MAX), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn closed_form_count() {
        for m in 1..15 {
            for w in 0..18 {
                assert_eq!(local_edges(m, w).len(), local_edge_count(m, w), "m={m} w={w}");
            }
        }
    }

    #[test]
    fn global_edges_map_incidence() {
        let inc = BTreeSet::from([(0, 0), (1, 0)]);
        assert_eq!(global_edges(&inc, 2, 1).unwrap(), vec![(0, 0), (1, 0)]);
        assert!(global_edges(&BTreeSet::new(), 2, 0).unwrap().is_empty());
        assert!(matches!(
            global_edges(&BTreeSet::from([(0, 3)]), 2, 1),
            Err(Error::IndexOutOfRange { what: "entity", .. })
        ));
    }

    #[test]
    fn node_matrix_shapes() {
        let enc = HashEncoder::new(4).unwrap();
        let s = SentenceList::from_sentences(&["Alice ran.", "It rained."]);
        let t = extract_entities(&s, &CapitalizedRecognizer, 32).unwrap();
        assert_eq!(t.len(), 1);
        let h = init_semantic_nodes(&s, &t, &enc).unwrap();
        assert_eq!(h.dim(), (3, 4));
        let h0 = init_semantic_nodes(&s, &EntityTable::default(), &enc).unwrap();
        assert_eq!(h0.dim(), (2, 4));
        assert_eq!(h, init_semantic_nodes(&s, &t, &enc).unwrap());
    }

    #[test]
    fn ablation_switches() {
        let h = Array2::zeros((7, 2));
        let inc = BTreeSet::from([(0, 0), (4, 0), (2, 1)]);
        let full = SemanticGraph::build(&h, 5, &inc, SentenceLinks::Window(1), true).unwrap();
        assert_eq!(full.n, 2);
        assert_eq!(full.edges().len(), 4 + 3);
        let no_ent = SemanticGraph::build(&h, 5, &inc, SentenceLinks::Window(1), false).unwrap();
        assert_eq!(no_ent.edges(), local_edges(5, 1));
        assert_eq!(no_ent.embeddings.nrows(), 5);
        let no_window = SemanticGraph::build(&h, 5, &inc, SentenceLinks::Complete, false).unwrap();
        assert_eq!(no_window.edges().len(), 10);
    }

    #[test]
    fn entity_bridges_distant_sentences() {
        let h = Array2::zeros((7, 2));
        let inc = BTreeSet::from([(0, 0), (5, 0)]);
        let g = SemanticGraph::build(&h, 6, &inc, SentenceLinks::Window(1), true).unwrap();
        let d = hop_distances(g.num_nodes(), &g.edges(), 0);
        assert_eq!(d[5], Some(2));
        let no_ent = SemanticGraph::build(&h, 6, &inc, SentenceLinks::Window(1), false).unwrap();
        assert_eq!(hop_distances(6, &no_ent.edges(), 0)[5], Some(5));
    }
}
