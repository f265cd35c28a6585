//! Coarse-to-fine intent graph of a single article.
//!
//! Node order is `k` coarse nodes followed by `k * l` fine nodes, the fine
//! node `(i, j)` sitting at index `k + i * l + j`.

use ndarray::Array2;

use crate::autodiff::{Tape, Var};
use crate::data::NewsItem;
use crate::encoders::{analyze_intent, IntentCache, IntentGenerator, Perspective, TextEncoder};
use crate::error::{Error, Result};
use crate::graph::NodeType;

/// Coarse embeddings: encode the generator's analysis for each prompt.
/// Row `i` corresponds to `prompts[i]`.
pub fn init_coarse_nodes(
    item: &NewsItem,
    prompts: &[Perspective],
    generator: &dyn IntentGenerator,
    encoder: &dyn TextEncoder,
    cache: &IntentCache,
) -> Result<Array2<f64>> {
    let analyses = analyze_intent(item, prompts, generator, cache)?;
    let texts: Vec<&str> = analyses.iter().map(String::as_str).collect();
    let h = encoder.encode(&texts)?;
    if h.dim() != (prompts.len(), encoder.dim()) {
        return Err(Error::ShapeMismatch(format!(
            "coarse embeddings {:?}, expected ({}, {})",
            h.dim(),
            prompts.len(),
            encoder.dim()
        )));
    }
    Ok(h)
}

pub fn validate_order(order: &[usize], k: usize) -> Result<()> {
    if order.len() != k {
        return Err(Error::InvalidOrder(format!("{} entries for {k} perspectives", order.len())));
    }
    let mut seen = vec![false; k];
    for &i in order {
        if i >= k || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidOrder(format!("{order:?} is not a permutation of 0..{k}")));
        }
    }
    Ok(())
}

type EdgeList = Vec<(usize, usize)>;

/// Coarse chain following `order`, and full coarse → own-fine links.
pub fn intent_edges(k: usize, l: usize, order: &[usize]) -> Result<(EdgeList, EdgeList)> {
    validate_order(order, k)?;
    let coarse = order.windows(2).map(|w| (w[0], w[1])).collect();
    let fine = (0..k)
        .flat_map(|i| (0..l).map(move |j| (i, k + i * l + j)))
        .collect();
    Ok((coarse, fine))
}

/// Result of the attention-based fine-node update.
pub struct FineUpdate {
    /// `(k * l) x d` updated fine embeddings.
    pub fine: Var,
    /// `(k * l) x m` attention over sentences; each row sums to one.
    pub attention: Var,
}

/// `h_f[i,j] = base[i,j] + softmax((h_c[i] + base[i,j]) · S^T) · S`, with
/// `S` the `m x d` sentence embeddings.
pub fn update_fine_nodes(tape: &mut Tape<'_>, base: Var, coarse: Var, sentences: Var, l: usize) -> Result<FineUpdate> {
    let (k, d) = tape.shape(coarse);
    let (rows, bd) = tape.shape(base);
    let (m, sd) = tape.shape(sentences);
    if rows != k * l || bd != d || sd != d {
        return Err(Error::ShapeMismatch(format!(
            "fine base {rows}x{bd}, coarse {k}x{d}, sentences {m}x{sd}, l={l}"
        )));
    }
    if m == 0 {
        return Err(Error::EmptyText);
    }
    let parent: Vec<usize> = (0..k).flat_map(|i| std::iter::repeat_n(i, l)).collect();
    let c = tape.gather(coarse, &parent);
    let query = tape.add(c, base);
    let st = tape.transpose(sentences);
    let scores = tape.matmul(query, st);
    let attention = tape.softmax_rows(scores);
    let context = tape.matmul(attention, sentences);
    let fine = tape.add(base, context);
    Ok(FineUpdate { fine, attention })
}

/// [`update_fine_nodes`] on plain matrices; returns `(fine, attention)`.
pub fn fine_nodes(
    base: &Array2<f64>,
    coarse: &Array2<f64>,
    sentences: &Array2<f64>,
    l: usize,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let mut tape = Tape::new();
    let b = tape.constant(base.clone());
    let c = tape.constant(coarse.clone());
    let s = tape.constant(sentences.clone());
    let up = update_fine_nodes(&mut tape, b, c, s, l)?;
    Ok((tape.value(up.fine).clone(), tape.value(up.attention).clone()))
}

/// Topology of the intent graph; embeddings live on the tape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntentGraph {
    pub k: usize,
    /// Fine nodes per coarse node; zero when fine nodes are disabled.
    pub l: usize,
    pub edges_coarse: Vec<(usize, usize)>,
    pub edges_fine: Vec<(usize, usize)>,
    pub node_types: Vec<NodeType>,
}

impl IntentGraph {
    pub fn build(k: usize, l: usize, order: &[usize]) -> Result<Self> {
        let (edges_coarse, edges_fine) = intent_edges(k, l, order)?;
        let node_types = std::iter::repeat_n(NodeType::CoarseIntent, k)
            .chain(std::iter::repeat_n(NodeType::FineIntent, k * l))
            .collect();
        Ok(IntentGraph {
            k,
            l,
            edges_coarse,
            edges_fine,
            node_types,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.k + self.k * self.l
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.edges_coarse.iter().chain(&self.edges_fine).copied().collect()
    }
}
