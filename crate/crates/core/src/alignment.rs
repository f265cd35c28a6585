//! Pseudo-node alignment of the semantic and intent graphs.
//!
//! `r` learnable pseudo nodes are connected to every semantic and intent
//! node. Each alignment layer runs two attention phases: graph → pseudo
//! (pseudo nodes read from all graph nodes) and pseudo → graph (each graph
//! node reads from all pseudo nodes). Attention logits are
//! `(h_a + e) · (h_b + e)` where `e` is a learned feature of the edge's
//! source type, target type, and direction.

use ndarray::Array2;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::NodeType;
use crate::intent_graph::IntentGraph;
use crate::semantic_graph::SemanticGraph;

/// Width of the one-hot edge descriptor: source type, target type, direction.
pub const EDGE_FEATURE_INPUTS: usize = 5 + 5 + 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    IntoPseudo,
    OutOfPseudo,
}

impl Direction {
    fn index(self) -> usize {
        match self {
            Direction::IntoPseudo => 0,
            Direction::OutOfPseudo => 1,
        }
    }
}

pub fn one_hot(src: NodeType, dst: NodeType, dir: Direction) -> [f64; EDGE_FEATURE_INPUTS] {
    let mut x = [0.0; EDGE_FEATURE_INPUTS];
    x[src.index()] = 1.0;
    x[5 + dst.index()] = 1.0;
    x[10 + dir.index()] = 1.0;
    x
}

/// Two-layer map from the one-hot edge descriptor to a `d`-vector:
/// `tanh(x · W1 + b1) · W2 + b2`.
#[derive(Clone, Copy, Debug)]
pub struct EdgeFeatureNet {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

impl EdgeFeatureNet {
    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Var {
        let h = tape.affine(x, self.w1, self.b1);
        let h = tape.tanh(h);
        tape.affine(h, self.w2, self.b2)
    }
}

pub fn pseudo_edge_feature(
    tape: &mut Tape<'_>,
    src: NodeType,
    dst: NodeType,
    dir: Direction,
    net: &EdgeFeatureNet,
) -> Var {
    let x = tape.row(&one_hot(src, dst, dir));
    net.forward(tape, x)
}

/// String-typed variant for external callers; unknown tags are rejected.
pub fn pseudo_edge_feature_named(
    tape: &mut Tape<'_>,
    src: &str,
    dst: &str,
    dir: Direction,
    net: &EdgeFeatureNet,
) -> Result<Var> {
    let src: NodeType = src.parse()?;
    let dst: NodeType = dst.parse()?;
    Ok(pseudo_edge_feature(tape, src, dst, dir, net))
}

/// Semantic and intent nodes plus `r` pseudo nodes. Graph nodes are indexed
/// semantic first, then intent; pseudo nodes have their own index space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommonGraph {
    pub node_types: Vec<NodeType>,
    pub r: usize,
    /// Number of leading semantic nodes in `node_types`.
    pub num_semantic: usize,
}

pub fn build_common_graph(sem: &SemanticGraph, int: &IntentGraph, r: usize) -> Result<CommonGraph> {
    if r == 0 {
        return Err(Error::InvalidConfig("at least one pseudo node is required".into()));
    }
    let node_types = sem.node_types.iter().chain(&int.node_types).copied().collect();
    Ok(CommonGraph {
        node_types,
        r,
        num_semantic: sem.num_nodes(),
    })
}

impl CommonGraph {
    pub fn num_graph_nodes(&self) -> usize {
        self.node_types.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.node_types.len() + self.r
    }

    /// Every `(pseudo, graph node)` pair; each carries both directions.
    pub fn pseudo_edges(&self) -> Vec<(usize, usize)> {
        (0..self.r)
            .flat_map(|p| (0..self.node_types.len()).map(move |v| (p, v)))
            .collect()
    }

    pub fn pseudo_edge_count(&self) -> usize {
        self.r * self.node_types.len()
    }
}

/// Per-graph-node edge features for both directions, `N x d` each.
#[derive(Clone, Copy, Debug)]
pub struct EdgeFeatures {
    /// Edge `v → p`: source `type(v)`, target pseudo.
    pub into_pseudo: Var,
    /// Edge `p → v`: source pseudo, target `type(v)`.
    pub out_of_pseudo: Var,
}

pub fn edge_features(tape: &mut Tape<'_>, common: &CommonGraph, net: &EdgeFeatureNet) -> EdgeFeatures {
    let n = common.num_graph_nodes();
    let mut into = Array2::zeros((n, EDGE_FEATURE_INPUTS));
    let mut out = Array2::zeros((n, EDGE_FEATURE_INPUTS));
    for (v, &t) in common.node_types.iter().enumerate() {
        into.row_mut(v)
            .assign(&ndarray::ArrayView1::from(&one_hot(t, NodeType::Pseudo, Direction::IntoPseudo)));
        out.row_mut(v)
            .assign(&ndarray::ArrayView1::from(&one_hot(NodeType::Pseudo, t, Direction::OutOfPseudo)));
    }
    let xi = tape.constant(into);
    let xo = tape.constant(out);
    EdgeFeatures {
        into_pseudo: net.forward(tape, xi),
        out_of_pseudo: net.forward(tape, xo),
    }
}

/// Feed-forward map of one alignment layer, `tanh(x · W1 + b1) · W2 + b2`,
/// shared by both phases.
#[derive(Clone, Copy, Debug)]
pub struct AlignLayer {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

impl AlignLayer {
    pub fn ffn(&self, tape: &mut Tape<'_>, x: Var) -> Var {
        let h = tape.affine(x, self.w1, self.b1);
        let h = tape.tanh(h);
        tape.affine(h, self.w2, self.b2)
    }
}

pub struct AlignOutput {
    /// `N x d` graph nodes after phase 2.
    pub graph: Var,
    /// `r x d` pseudo nodes after phase 1.
    pub pseudo: Var,
    /// `r x N` graph → pseudo attention.
    pub alpha_into: Var,
    /// `N x r` pseudo → graph attention.
    pub alpha_out: Var,
}

/// One bidirectional alignment layer.
pub fn align_step(
    tape: &mut Tape<'_>,
    graph: Var,
    pseudo: Var,
    features: &EdgeFeatures,
    layer: &AlignLayer,
) -> AlignOutput {
    // graph -> pseudo
    let keys = tape.add(graph, features.into_pseudo);
    let keys_t = tape.transpose(keys);
    let cross = tape.matmul(pseudo, keys_t);
    let bias = tape.row_dot(features.into_pseudo, keys);
    let bias_row = tape.transpose(bias);
    let logits = tape.add_row(cross, bias_row);
    let alpha_into = tape.softmax_rows(logits);
    let gathered = tape.matmul(alpha_into, graph);
    let pre = tape.add(pseudo, gathered);
    let pseudo = layer.ffn(tape, pre);

    // pseudo -> graph
    let queries = tape.add(graph, features.out_of_pseudo);
    let pseudo_t = tape.transpose(pseudo);
    let cross = tape.matmul(queries, pseudo_t);
    let bias = tape.row_dot(queries, features.out_of_pseudo);
    let logits = tape.add_col(cross, bias);
    let alpha_out = tape.softmax_rows(logits);
    let gathered = tape.matmul(alpha_out, pseudo);
    let pre = tape.add(graph, gathered);
    let graph = layer.ffn(tape, pre);

    AlignOutput {
        graph,
        pseudo,
        alpha_into,
        alpha_out,
    }
}
