//! Shared fixtures and scalar-loop oracles for the integration tests.
//!
//! The oracles below are written against plain `Vec<Vec<f64>>` with explicit
//! loops and do not call into the library's tensor code.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use veracity_core::data::{synthetic, Label, SyntheticSpec};
use veracity_core::encoders::PromptSet;
use veracity_core::model::{prepare_items, ModelConfig, OfflineComponents, PreparedItem};

pub type Mat = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| {
        let z: f64 = StandardNormal.sample(rng);
        z * scale
    })
}

pub fn to_vec(a: &Array2<f64>) -> Mat {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Mat) -> f64 {
    assert_eq!(a.nrows(), b.len(), "row count");
    let mut worst = 0.0f64;
    for (i, row) in b.iter().enumerate() {
        assert_eq!(a.ncols(), row.len(), "column count");
        for (j, &x) in row.iter().enumerate() {
            worst = worst.max((a[[i, j]] - x).abs());
        }
    }
    worst
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn matvec_row(x: &[f64], w: &Mat) -> Vec<f64> {
    // x (len in) times w (in x out)
    let out = w[0].len();
    let mut y = vec![0.0; out];
    for (i, xi) in x.iter().enumerate() {
        for j in 0..out {
            y[j] += xi * w[i][j];
        }
    }
    y
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `h'_v = h_v W_s + sum over neighbors u of w_uv h_u W_n`, with
/// `w_uv = sigmoid([h_u, h_v, |h_u - h_v|] . e_w + e_b)`.
pub fn local_step_oracle(h: &Mat, edges: &[(usize, usize)], edge_w: &[f64], edge_b: f64, w_self: &Mat, w_nbr: &Mat) -> Mat {
    let n = h.len();
    let d = h[0].len();
    let mut agg = vec![vec![0.0; d]; n];
    for &(a, b) in edges {
        for (u, v) in [(a, b), (b, a)] {
            let mut z = edge_b;
            for i in 0..d {
                z += edge_w[i] * h[u][i] + edge_w[d + i] * h[v][i] + edge_w[2 * d + i] * (h[u][i] - h[v][i]).abs();
            }
            let w = sigmoid(z);
            for i in 0..d {
                agg[v][i] += w * h[u][i];
            }
        }
    }
    (0..n)
        .map(|v| {
            let s = matvec_row(&h[v], w_self);
            let t = matvec_row(&agg[v], w_nbr);
            s.iter().zip(&t).map(|(a, b)| a + b).collect()
        })
        .collect()
}

/// Returns `(h', root', scores)`.
pub fn global_step_oracle(
    h: &Mat,
    root: &[f64],
    root_w: &[f64],
    root_b: f64,
    psi_w: &Mat,
    psi_b: &[f64],
) -> (Mat, Vec<f64>, Vec<f64>) {
    let d = root.len();
    let logits: Vec<f64> = h.iter().map(|hv| dot(hv, root_w) + root_b).collect();
    let scores = softmax(&logits);
    let mut new_root = root.to_vec();
    for (v, hv) in h.iter().enumerate() {
        for i in 0..d {
            new_root[i] += scores[v] * hv[i];
        }
    }
    let pre = matvec_row(&new_root, psi_w);
    let psi: Vec<f64> = pre.iter().zip(psi_b).map(|(a, b)| (a + b).tanh()).collect();
    let out = h.iter().map(|hv| hv.iter().zip(&psi).map(|(a, b)| a + b).collect()).collect();
    (out, new_root, scores)
}

/// Returns `(fine, attention)`.
pub fn fine_oracle(base: &Mat, coarse: &Mat, sentences: &Mat, l: usize) -> (Mat, Mat) {
    let mut fine = Vec::new();
    let mut att = Vec::new();
    for (i, c) in coarse.iter().enumerate() {
        for j in 0..l {
            let b = &base[i * l + j];
            let q: Vec<f64> = c.iter().zip(b).map(|(x, y)| x + y).collect();
            let logits: Vec<f64> = sentences.iter().map(|s| dot(&q, s)).collect();
            let a = softmax(&logits);
            let mut f = b.clone();
            for (t, s) in sentences.iter().enumerate() {
                for (fi, si) in f.iter_mut().zip(s) {
                    *fi += a[t] * si;
                }
            }
            fine.push(f);
            att.push(a);
        }
    }
    (fine, att)
}

pub struct FfnOracle<'a> {
    pub w1: &'a Mat,
    pub b1: &'a [f64],
    pub w2: &'a Mat,
    pub b2: &'a [f64],
}

impl FfnOracle<'_> {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let h: Vec<f64> = matvec_row(x, self.w1).iter().zip(self.b1).map(|(a, b)| (a + b).tanh()).collect();
        matvec_row(&h, self.w2).iter().zip(self.b2).map(|(a, b)| a + b).collect()
    }
}

/// One-hot edge descriptor: 5 source-type slots, 5 target-type slots, 2
/// direction slots. Type order: sentence, entity, coarse, fine, pseudo.
pub fn edge_one_hot(src: usize, dst: usize, into_pseudo: bool) -> Vec<f64> {
    let mut x = vec![0.0; 12];
    x[src] = 1.0;
    x[5 + dst] = 1.0;
    x[if into_pseudo { 10 } else { 11 }] = 1.0;
    x
}

/// Two-phase alignment. `types[v]` is the type slot of graph node `v`.
/// Returns `(graph', pseudo', alpha_into r x N, alpha_out N x r)`.
pub fn align_oracle(graph: &Mat, pseudo: &Mat, types: &[usize], net: &FfnOracle<'_>, ffn: &FfnOracle<'_>) -> (Mat, Mat, Mat, Mat) {
    const PSEUDO: usize = 4;
    let n = graph.len();
    let r = pseudo.len();
    let e_in: Mat = types.iter().map(|&t| net.apply(&edge_one_hot(t, PSEUDO, true))).collect();
    let e_out: Mat = types.iter().map(|&t| net.apply(&edge_one_hot(PSEUDO, t, false))).collect();
    let add = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + y).collect() };

    let mut alpha_in = Vec::new();
    let mut new_pseudo = Vec::new();
    for p in 0..r {
        let logits: Vec<f64> = (0..n)
            .map(|v| dot(&add(&pseudo[p], &e_in[v]), &add(&graph[v], &e_in[v])))
            .collect();
        let a = softmax(&logits);
        let mut acc = pseudo[p].clone();
        for v in 0..n {
            for (x, g) in acc.iter_mut().zip(&graph[v]) {
                *x += a[v] * g;
            }
        }
        new_pseudo.push(ffn.apply(&acc));
        alpha_in.push(a);
    }
    let mut alpha_out = Vec::new();
    let mut new_graph = Vec::new();
    for v in 0..n {
        let logits: Vec<f64> = (0..r)
            .map(|p| dot(&add(&graph[v], &e_out[v]), &add(&new_pseudo[p], &e_out[v])))
            .collect();
        let b = softmax(&logits);
        let mut acc = graph[v].clone();
        for p in 0..r {
            for (x, q) in acc.iter_mut().zip(&new_pseudo[p]) {
                *x += b[p] * q;
            }
        }
        new_graph.push(ffn.apply(&acc));
        alpha_out.push(b);
    }
    (new_graph, new_pseudo, alpha_in, alpha_out)
}

pub fn pool_oracle(rows: &Mat) -> Vec<f64> {
    let d = rows[0].len();
    let mut out = vec![0.0; d];
    for r in rows {
        for i in 0..d {
            out[i] += r[i];
        }
    }
    out.iter().map(|x| x / rows.len() as f64).collect()
}

pub fn bce_oracle(y: f64, p: f64) -> f64 {
    let p = p.clamp(1e-7, 1.0 - 1e-7);
    if y == 1.0 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Fraction of (fake, real) pairs ordered correctly, ties counting half.
pub fn auc_bruteforce(labels: &[Label], scores: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if labels[i] == Label::Fake && labels[j] == Label::Real {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    if den == 0.0 {
        0.5
    } else {
        num / den
    }
}

/// Random prepared article with the given sizes; embeddings are small
/// Gaussians and entity mentions are drawn at random.
pub fn random_item(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize, d: usize, label: Label) -> PreparedItem {
    let mut incidence = BTreeSet::new();
    for e in 0..n {
        // every entity is mentioned at least once
        incidence.insert((rng.random_range(0..m), e));
        for s in 0..m {
            if rng.random_bool(0.3) {
                incidence.insert((s, e));
            }
        }
    }
    PreparedItem {
        id: format!("rand-{}", rng.random::<u32>()),
        label,
        sentences: (0..m).map(|i| format!("sentence {i}")).collect(),
        entities: (0..n).map(|i| format!("entity {i}")).collect(),
        semantic: randn(rng, m + n, d, 0.5),
        incidence,
        coarse: randn(rng, k, d, 0.5),
    }
}

pub fn random_order(rng: &mut ChaCha8Rng, k: usize) -> Vec<usize> {
    let mut o: Vec<usize> = (0..k).collect();
    o.shuffle(rng);
    o
}

/// Small model configuration used throughout the integration tests.
pub fn small_config(dim: usize) -> ModelConfig {
    ModelConfig {
        dim,
        fine_l: 2,
        pseudo_r: 4,
        depth: 2,
        align_depth: 2,
        head_hidden: vec![16, 16],
        edge_hidden: 8,
        ..ModelConfig::default()
    }
}

/// Prepare a generated corpus with the offline components.
pub fn prepared_corpus(spec: &SyntheticSpec, config: &ModelConfig) -> Vec<PreparedItem> {
    let corpus = synthetic::generate(spec);
    let off = OfflineComponents::new(config.dim, PromptSet::four_perspectives()).expect("offline components");
    prepare_items(&corpus.items, &off.components(), config).expect("prepare")
}
