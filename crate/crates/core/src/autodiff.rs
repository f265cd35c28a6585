//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Values are 2-D
//! arrays; vectors are `1 x d` rows and scalars are `1 x 1`. Learnable
//! tensors enter through [`Tape::param`], which borrows from a
//! [`ParamStore`] instead of copying, so one store can back many tapes at
//! once (one per article in a batch).
//!
//! All matrices use the row-vector convention: a linear map is applied as
//! `X · W` with `W` stored `in x out`.

use std::borrow::Cow;
use std::collections::HashMap;

use ndarray::{s, Array2, Axis, Zip};

use crate::params::{ParamId, ParamStore};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `n x c` plus a broadcast `1 x c` row.
    AddRow(Var, Var),
    /// `n x c` plus a broadcast `n x 1` column.
    AddCol(Var, Var),
    /// `n x c` scaled row-wise by an `n x 1` column.
    MulCol(Var, Var),
    Scale(Var, f64),
    Abs(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Transpose(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Gather(Var, Vec<usize>),
    /// Segment sum of rows into `rows` output rows.
    ScatterAdd(Var, Vec<usize>),
    SoftmaxRows(Var),
    SumRows(Var),
    MeanRows(Var),
    /// Row-wise dot product, `n x 1`.
    RowDot(Var, Var),
    /// Binary cross-entropy of a `1 x 1` probability against a fixed label.
    Bce { prob: Var, label: f64, eps: f64 },
    /// Mean of `1 x 1` scalars.
    MeanScalars(Vec<Var>),
}

struct Node<'p> {
    value: Cow<'p, Array2<f64>>,
    op: Op,
}

/// Recorded computation for one forward pass.
pub struct Tape<'p> {
    store: Option<&'p ParamStore>,
    nodes: Vec<Node<'p>>,
    param_vars: HashMap<ParamId, Var>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Tape<'p> {
    /// A tape with no parameter store; only constants and leaves.
    pub fn new() -> Self {
        Tape {
            store: None,
            nodes: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    pub fn with_params(store: &'p ParamStore) -> Self {
        Tape {
            store: Some(store),
            nodes: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// Register an input. Every leaf receives a gradient on `backward`.
    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Alias of [`Tape::leaf`] used for inputs whose gradient is not needed.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn row(&mut self, values: &[f64]) -> Var {
        let a = Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("row shape");
        self.constant(a)
    }

    /// Borrow a learnable tensor from the store. Repeated calls return the
    /// same node so gradients accumulate in one place.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let store = self.store.expect("tape was created without a parameter store");
        self.nodes.push(Node {
            value: Cow::Borrowed(store.get(id)),
            op: Op::Leaf,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(id, v);
        v
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        let a = self.value(v);
        debug_assert_eq!(a.dim(), (1, 1));
        a[[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).dot(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add: shape mismatch");
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "sub: shape mismatch");
        let out = self.value(a) - self.value(b);
        self.push(out, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul: shape mismatch");
        let out = self.value(a) * self.value(b);
        self.push(out, Op::Mul(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (_, c) = self.shape(a);
        assert_eq!(self.shape(row), (1, c), "add_row: expected 1 x {c}");
        let out = self.value(a) + self.value(row);
        self.push(out, Op::AddRow(a, row))
    }

    pub fn add_col(&mut self, a: Var, col: Var) -> Var {
        let (n, _) = self.shape(a);
        assert_eq!(self.shape(col), (n, 1), "add_col: expected {n} x 1");
        let out = self.value(a) + self.value(col);
        self.push(out, Op::AddCol(a, col))
    }

    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        let (n, _) = self.shape(a);
        assert_eq!(self.shape(col), (n, 1), "mul_col: expected {n} x 1");
        let out = self.value(a) * self.value(col);
        self.push(out, Op::MulCol(a, col))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a) * k;
        self.push(out, Op::Scale(a, k))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::abs);
        self.push(out, Op::Abs(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).t().to_owned();
        self.push(out, Op::Transpose(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views).expect("concat_cols: row counts differ");
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(0), &views).expect("concat_rows: column counts differ");
        self.push(out, Op::ConcatRows(parts.to_vec()))
    }

    /// Select rows by index (repeats allowed).
    pub fn gather(&mut self, a: Var, idx: &[usize]) -> Var {
        let out = self.value(a).select(Axis(0), idx);
        self.push(out, Op::Gather(a, idx.to_vec()))
    }

    pub fn rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let idx: Vec<usize> = (start..start + len).collect();
        self.gather(a, &idx)
    }

    /// `out[idx[e]] += a[e]` for every row `e`, with `rows` output rows.
    pub fn scatter_add(&mut self, a: Var, idx: &[usize], rows: usize) -> Var {
        let src = self.value(a);
        assert_eq!(src.nrows(), idx.len(), "scatter_add: index length");
        let mut out = Array2::zeros((rows, src.ncols()));
        for (e, &t) in idx.iter().enumerate() {
            let mut dst = out.row_mut(t);
            dst += &src.row(e);
        }
        self.push(out, Op::ScatterAdd(a, idx.to_vec()))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let out = softmax_rows(self.value(a));
        self.push(out, Op::SoftmaxRows(a))
    }

    pub fn sum_rows(&mut self, a: Var) -> Var {
        let out = self.value(a).sum_axis(Axis(0)).insert_axis(Axis(0));
        self.push(out, Op::SumRows(a))
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let n = v.nrows() as f64;
        let out = v.sum_axis(Axis(0)).insert_axis(Axis(0)) / n;
        self.push(out, Op::MeanRows(a))
    }

    pub fn row_dot(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "row_dot: shape mismatch");
        let out = (self.value(a) * self.value(b))
            .sum_axis(Axis(1))
            .insert_axis(Axis(1));
        self.push(out, Op::RowDot(a, b))
    }

    /// Affine map `x · w + b` with `b` a `1 x out` row.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let y = self.matmul(x, w);
        self.add_row(y, b)
    }

    pub fn bce(&mut self, prob: Var, label: f64, eps: f64) -> Var {
        let p = self.scalar(prob).clamp(eps, 1.0 - eps);
        let loss = -label * p.ln() - (1.0 - label) * (1.0 - p).ln();
        self.push(Array2::from_elem((1, 1), loss), Op::Bce { prob, label, eps })
    }

    pub fn mean_scalars(&mut self, xs: &[Var]) -> Var {
        let n = xs.len() as f64;
        let total: f64 = xs.iter().map(|&x| self.scalar(x)).sum();
        self.push(Array2::from_elem((1, 1), total / n), Op::MeanScalars(xs.to_vec()))
    }

    /// Back-propagate from a `1 x 1` output.
    pub fn backward(&self, output: Var) -> Gradients {
        assert_eq!(self.shape(output), (1, 1), "backward needs a scalar output");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Array2::ones((1, 1)));
        let mut by_var = HashMap::new();
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if let Op::Leaf = self.nodes[i].op {
                by_var.insert(Var(i), g);
            } else {
                self.propagate(i, g, &mut grads);
            }
        }
        let params = self
            .param_vars
            .iter()
            .filter_map(|(&id, v)| by_var.get(v).map(|g| (id, g.clone())))
            .collect();
        Gradients { by_var, params }
    }

    fn propagate(&self, i: usize, g: Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let ga = g.dot(&self.value(*b).t());
                let gb = self.value(*a).t().dot(&g);
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::Add(a, b) => {
                accumulate(grads, *b, g.clone());
                accumulate(grads, *a, g);
            }
            Op::Sub(a, b) => {
                accumulate(grads, *b, -&g);
                accumulate(grads, *a, g);
            }
            Op::Mul(a, b) => {
                let ga = &g * self.value(*b);
                let gb = &g * self.value(*a);
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::AddRow(a, r) => {
                let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                accumulate(grads, *r, gr);
                accumulate(grads, *a, g);
            }
            Op::AddCol(a, c) => {
                let gc = g.sum_axis(Axis(1)).insert_axis(Axis(1));
                accumulate(grads, *c, gc);
                accumulate(grads, *a, g);
            }
            Op::MulCol(a, c) => {
                let ga = &g * self.value(*c);
                let gc = (&g * self.value(*a)).sum_axis(Axis(1)).insert_axis(Axis(1));
                accumulate(grads, *a, ga);
                accumulate(grads, *c, gc);
            }
            Op::Scale(a, k) => accumulate(grads, *a, g * *k),
            Op::Abs(a) => {
                let mut ga = g;
                Zip::from(&mut ga)
                    .and(self.value(*a))
                    .for_each(|gv, &x| *gv *= sign(x));
                accumulate(grads, *a, ga);
            }
            Op::Sigmoid(a) => {
                let mut ga = g;
                Zip::from(&mut ga)
                    .and(&*node.value)
                    .for_each(|gv, &y| *gv *= y * (1.0 - y));
                accumulate(grads, *a, ga);
            }
            Op::Tanh(a) => {
                let mut ga = g;
                Zip::from(&mut ga)
                    .and(&*node.value)
                    .for_each(|gv, &y| *gv *= 1.0 - y * y);
                accumulate(grads, *a, ga);
            }
            Op::Relu(a) => {
                let mut ga = g;
                Zip::from(&mut ga)
                    .and(self.value(*a))
                    .for_each(|gv, &x| {
                        if x <= 0.0 {
                            *gv = 0.0
                        }
                    });
                accumulate(grads, *a, ga);
            }
            Op::Transpose(a) => accumulate(grads, *a, g.t().to_owned()),
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let c = self.value(p).ncols();
                    accumulate(grads, p, g.slice(s![.., off..off + c]).to_owned());
                    off += c;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let r = self.value(p).nrows();
                    accumulate(grads, p, g.slice(s![off..off + r, ..]).to_owned());
                    off += r;
                }
            }
            Op::Gather(a, idx) => {
                let src = self.value(*a);
                let mut ga = Array2::zeros(src.dim());
                for (e, &t) in idx.iter().enumerate() {
                    let mut dst = ga.row_mut(t);
                    dst += &g.row(e);
                }
                accumulate(grads, *a, ga);
            }
            Op::ScatterAdd(a, idx) => {
                let ga = g.select(Axis(0), idx);
                accumulate(grads, *a, ga);
            }
            Op::SoftmaxRows(a) => {
                let y = &*node.value;
                let dots = (&g * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                let ga = y * &(&g - &dots);
                accumulate(grads, *a, ga);
            }
            Op::SumRows(a) => {
                let n = self.value(*a).nrows();
                let ga = g.broadcast((n, g.ncols())).expect("broadcast").to_owned();
                accumulate(grads, *a, ga);
            }
            Op::MeanRows(a) => {
                let n = self.value(*a).nrows();
                let ga = g.broadcast((n, g.ncols())).expect("broadcast").to_owned() / n as f64;
                accumulate(grads, *a, ga);
            }
            Op::RowDot(a, b) => {
                let ga = self.value(*b) * &g;
                let gb = self.value(*a) * &g;
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::Bce { prob, label, eps } => {
                let p = self.scalar(*prob);
                let d = if p < *eps || p > 1.0 - *eps {
                    0.0
                } else {
                    -label / p + (1.0 - label) / (1.0 - p)
                };
                accumulate(grads, *prob, Array2::from_elem((1, 1), d * g[[0, 0]]));
            }
            Op::MeanScalars(xs) => {
                let share = g[[0, 0]] / xs.len() as f64;
                for &x in xs {
                    accumulate(grads, x, Array2::from_elem((1, 1), share));
                }
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
    match &mut grads[v.0] {
        Some(acc) => *acc += &g,
        slot @ None => *slot = Some(g),
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable row-wise softmax.
pub fn softmax_rows(a: &Array2<f64>) -> Array2<f64> {
    let mut out = a.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug, Default)]
pub struct Gradients {
    by_var: HashMap<Var, Array2<f64>>,
    params: HashMap<ParamId, Array2<f64>>,
}

impl Gradients {
    /// Gradient of a leaf; `None` when the output does not depend on it.
    pub fn wrt(&self, v: Var) -> Option<&Array2<f64>> {
        self.by_var.get(&v)
    }

    pub fn param(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.params.get(&id)
    }

    pub fn into_params(self) -> HashMap<ParamId, Array2<f64>> {
        self.params
    }
}
