//! Pseudo-node pooling, the classification MLP, and the loss.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::data::Label;

/// Probability clamp applied before taking logarithms.
pub const BCE_EPS: f64 = 1e-7;

/// `1 x d` mean of the pseudo rows.
pub fn pool_pseudo(tape: &mut Tape<'_>, pseudo: Var) -> Var {
    tape.mean_rows(pseudo)
}

/// Hidden layers `(w, b)` followed by a single-logit output layer.
#[derive(Clone, Debug)]
pub struct HeadLayers {
    pub hidden: Vec<(Var, Var)>,
    pub out_w: Var,
    pub out_b: Var,
}

pub struct HeadOutput {
    /// `1 x 1` pre-activation.
    pub logit: Var,
    /// `1 x 1` probability of the fake class.
    pub prob: Var,
}

/// `sigmoid(MLP(h_cls))` with rectified hidden layers.
pub fn predict(tape: &mut Tape<'_>, h_cls: Var, head: &HeadLayers) -> HeadOutput {
    let mut x = h_cls;
    for &(w, b) in &head.hidden {
        let z = tape.affine(x, w, b);
        x = tape.relu(z);
    }
    let logit = tape.affine(x, head.out_w, head.out_b);
    let prob = tape.sigmoid(logit);
    HeadOutput { logit, prob }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub prob_fake: f64,
    pub logit: f64,
    pub label_pred: Label,
}

impl Prediction {
    pub fn from_logit(logit: f64) -> Self {
        let prob_fake = crate::autodiff::sigmoid(logit);
        Prediction {
            prob_fake,
            logit,
            label_pred: Label::from_prob(prob_fake),
        }
    }
}

/// `-y log p - (1 - y) log(1 - p)` with `p` clamped to `[eps, 1 - eps]`.
pub fn bce_loss(y: Label, prob: f64) -> f64 {
    let p = prob.clamp(BCE_EPS, 1.0 - BCE_EPS);
    let y = y.as_f64();
    -y * p.ln() - (1.0 - y) * (1.0 - p).ln()
}

pub fn mean_bce(labels: &[Label], probs: &[f64]) -> f64 {
    assert_eq!(labels.len(), probs.len(), "mean_bce: length mismatch");
    if labels.is_empty() {
        return 0.0;
    }
    labels.iter().zip(probs).map(|(&y, &p)| bce_loss(y, p)).sum::<f64>() / labels.len() as f64
}

/// Plain-matrix head evaluation: `(hidden weights, biases), out_w, out_b`.
pub fn predict_plain(
    h_cls: &Array1<f64>,
    hidden: &[(Array2<f64>, Array2<f64>)],
    out_w: &Array2<f64>,
    out_b: &Array2<f64>,
) -> Prediction {
    let mut x = h_cls.clone();
    for (w, b) in hidden {
        x = (x.dot(w) + b.row(0)).mapv(|v| v.max(0.0));
    }
    let logit = x.dot(&out_w.column(0)) + out_b[[0, 0]];
    Prediction::from_logit(logit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn bce_values() {
        assert!((bce_loss(Label::Fake, 1.0 - BCE_EPS) - 1e-7).abs() < 1e-12);
        assert!((bce_loss(Label::Real, 0.5) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(bce_loss(Label::Fake, 0.0).is_finite());
        assert!(bce_loss(Label::Real, 1.0).is_finite());
        assert!(bce_loss(Label::Fake, 1.0) > 0.0);
    }

    #[test]
    fn pooling_examples() {
        let mut tape = Tape::new();
        let one = tape.constant(array![[1.0, -2.0, 3.0]]);
        let p = pool_pseudo(&mut tape, one);
        assert_eq!(tape.value(p), &array![[1.0, -2.0, 3.0]]);
        let sym = tape.constant(array![[0.25, -0.5], [-0.25, 0.5]]);
        let p = pool_pseudo(&mut tape, sym);
        assert_eq!(tape.value(p), &array![[0.0, 0.0]]);
    }

    #[test]
    fn zero_head_gives_half() {
        let mut tape = Tape::new();
        let head = HeadLayers {
            hidden: vec![(tape.constant(Array2::zeros((3, 4))), tape.constant(Array2::zeros((1, 4))))],
            out_w: tape.constant(Array2::zeros((4, 1))),
            out_b: tape.constant(Array2::zeros((1, 1))),
        };
        let x = tape.constant(array![[5.0, -1.0, 2.0]]);
        let out = predict(&mut tape, x, &head);
        assert_eq!(tape.scalar(out.prob), 0.5);
        let pred = Prediction::from_logit(tape.scalar(out.logit));
        assert_eq!(pred.label_pred, Label::Fake);
    }

    #[test]
    fn plain_matches_tape() {
        let w0 = array![[0.3, -0.7], [1.1, 0.2]];
        let b0 = array![[0.05, -0.1]];
        let ow = array![[0.9], [-1.3]];
        let ob = array![[0.2]];
        let x = array![0.4, -0.6];
        let plain = predict_plain(&x, &[(w0.clone(), b0.clone())], &ow, &ob);
        let mut tape = Tape::new();
        let head = HeadLayers {
            hidden: vec![(tape.constant(w0), tape.constant(b0))],
            out_w: tape.constant(ow),
            out_b: tape.constant(ob),
        };
        let xv = tape.row(x.as_slice().unwrap());
        let out = predict(&mut tape, xv, &head);
        assert_eq!(tape.scalar(out.prob), plain.prob_fake);
    }
}
