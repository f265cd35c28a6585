//! Dual-level graph update: learned-weight local passing followed by a
//! super-root global step with residual fusion.
//!
//! Parameters use the row-vector layout of [`crate::autodiff`]: node
//! embeddings are rows, and `H · W_self` stands for `W1 h_v` applied to
//! every node.

use crate::autodiff::{Tape, Var};
use crate::graph::directed_messages;

/// Edge-weight projection and update matrices for one local layer.
#[derive(Clone, Copy, Debug)]
pub struct LocalLayer {
    /// `3d x 1`
    pub edge_w: Var,
    /// `1 x 1`
    pub edge_b: Var,
    /// `d x d`
    pub w_self: Var,
    /// `d x d`
    pub w_nbr: Var,
}

/// Root-attention projection and residual transform for one global layer.
#[derive(Clone, Copy, Debug)]
pub struct GlobalLayer {
    /// `d x 1`
    pub root_w: Var,
    /// `1 x 1`
    pub root_b: Var,
    /// `d x d`
    pub psi_w: Var,
    /// `1 x d`
    pub psi_b: Var,
}

/// `sigmoid([h_u ‖ h_v ‖ |h_u - h_v|] · W_e + b_e)` for each
/// `(source, target)` message, as an `E x 1` column.
pub fn edge_weights(tape: &mut Tape<'_>, h: Var, messages: &[(usize, usize)], layer: &LocalLayer) -> Var {
    let src: Vec<usize> = messages.iter().map(|m| m.0).collect();
    let dst: Vec<usize> = messages.iter().map(|m| m.1).collect();
    let hu = tape.gather(h, &src);
    let hv = tape.gather(h, &dst);
    let diff = tape.sub(hu, hv);
    let adiff = tape.abs(diff);
    let feat = tape.concat_cols(&[hu, hv, adiff]);
    let logit = tape.affine(feat, layer.edge_w, layer.edge_b);
    tape.sigmoid(logit)
}

pub struct LocalOutput {
    pub h: Var,
    /// Directed messages in the order used by `weights`.
    pub messages: Vec<(usize, usize)>,
    /// `E x 1` weights, or `None` for an edgeless graph.
    pub weights: Option<Var>,
}

/// `h'_v = W1 h_v + W2 Σ_{u ∈ N(v)} w_uv h_u`; each undirected edge carries a
/// message in both directions with its own weight.
pub fn local_step(tape: &mut Tape<'_>, h: Var, edges: &[(usize, usize)], layer: &LocalLayer) -> LocalOutput {
    let n = tape.shape(h).0;
    let self_term = tape.matmul(h, layer.w_self);
    if edges.is_empty() {
        return LocalOutput {
            h: self_term,
            messages: Vec::new(),
            weights: None,
        };
    }
    let messages = directed_messages(edges);
    let weights = edge_weights(tape, h, &messages, layer);
    let src: Vec<usize> = messages.iter().map(|m| m.0).collect();
    let dst: Vec<usize> = messages.iter().map(|m| m.1).collect();
    let hu = tape.gather(h, &src);
    let weighted = tape.mul_col(hu, weights);
    let agg = tape.scatter_add(weighted, &dst, n);
    let nbr_term = tape.matmul(agg, layer.w_nbr);
    let out = tape.add(self_term, nbr_term);
    LocalOutput {
        h: out,
        messages,
        weights: Some(weights),
    }
}

pub struct GlobalOutput {
    pub h: Var,
    pub root: Var,
    /// `1 x N` attention of the root over nodes.
    pub scores: Var,
}

/// `root' = root + Σ_v softmax_v(h_v · W_r + b_r) h_v`, then
/// `h'_v = ψ(root') + h_v` with `ψ(x) = tanh(x · W_ψ + b_ψ)`.
pub fn global_step(tape: &mut Tape<'_>, h: Var, root: Var, layer: &GlobalLayer) -> GlobalOutput {
    let logits = tape.affine(h, layer.root_w, layer.root_b);
    let logits_row = tape.transpose(logits);
    let scores = tape.softmax_rows(logits_row);
    let pooled = tape.matmul(scores, h);
    let root = tape.add(root, pooled);
    let pre = tape.affine(root, layer.psi_w, layer.psi_b);
    let psi = tape.tanh(pre);
    let h = tape.add_row(h, psi);
    GlobalOutput { h, root, scores }
}

/// Per-layer parameters of one graph's stack. `global` is `None` when the
/// global step is ablated.
#[derive(Clone, Debug)]
pub struct DualStack {
    /// `1 x d` learned root base; reset to this value every forward pass.
    pub root: Option<Var>,
    pub layers: Vec<(LocalLayer, Option<GlobalLayer>)>,
}

/// Intermediate values of one dual layer, kept for inspection.
pub struct LayerTrace {
    pub messages: Vec<(usize, usize)>,
    pub edge_weights: Option<Var>,
    pub root_scores: Option<Var>,
}

pub struct DualOutput {
    pub h: Var,
    pub root: Option<Var>,
    pub layers: Vec<LayerTrace>,
}

/// Local step then (optionally) global step, for each layer.
pub fn dual_update(tape: &mut Tape<'_>, h: Var, edges: &[(usize, usize)], stack: &DualStack) -> DualOutput {
    let mut h = h;
    let mut root = stack.root;
    let mut traces = Vec::with_capacity(stack.layers.len());
    for (local, global) in &stack.layers {
        let lo = local_step(tape, h, edges, local);
        h = lo.h;
        let mut root_scores = None;
        if let (Some(g), Some(r)) = (global, root) {
            let go = global_step(tape, h, r, g);
            h = go.h;
            root = Some(go.root);
            root_scores = Some(go.scores);
        }
        traces.push(LayerTrace {
            messages: lo.messages,
            edge_weights: lo.weights,
            root_scores,
        });
    }
    DualOutput { h, root, layers: traces }
}

/// Scalar edge weight for one pair of embeddings.
pub fn edge_weight(h_u: &[f64], h_v: &[f64], edge_w: &[f64], edge_b: f64) -> f64 {
    let d = h_u.len();
    assert_eq!(h_v.len(), d, "edge_weight: embedding lengths differ");
    assert_eq!(edge_w.len(), 3 * d, "edge_weight: projection must have 3d entries");
    let mut z = edge_b;
    for i in 0..d {
        z += edge_w[i] * h_u[i] + edge_w[d + i] * h_v[i] + edge_w[2 * d + i] * (h_u[i] - h_v[i]).abs();
    }
    crate::autodiff::sigmoid(z)
}
