//! Classification metrics over fake-class probabilities.

use serde::{Deserialize, Serialize};

use crate::data::Label;

/// Counts with "fake" as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub acc: f64,
    pub macro_f1: f64,
    pub f1_real: f64,
    pub f1_fake: f64,
    pub confusion: Confusion,
}

/// F1 from counts; zero when the class is never predicted nor present.
fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Area under the ROC curve via the Mann-Whitney rank statistic, with
/// midranks for ties. Returns 0.5 when either class is absent.
pub fn auc(labels: &[Label], scores: &[f64]) -> f64 {
    assert_eq!(labels.len(), scores.len(), "auc: length mismatch");
    let n_pos = labels.iter().filter(|&&y| y == Label::Fake).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return 0.5;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&t| labels[t] == Label::Fake).count() as f64 * mid;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    u / (n_pos as f64 * n_neg as f64)
}

pub fn confusion(labels: &[Label], scores: &[f64]) -> Confusion {
    let mut c = Confusion::default();
    for (&y, &s) in labels.iter().zip(scores) {
        match (y, Label::from_prob(s)) {
            (Label::Fake, Label::Fake) => c.tp += 1,
            (Label::Real, Label::Real) => c.tn += 1,
            (Label::Real, Label::Fake) => c.fp += 1,
            (Label::Fake, Label::Real) => c.fn_ += 1,
        }
    }
    c
}

/// Report for a non-empty set of predictions; thresholds at 0.5.
pub fn report(labels: &[Label], scores: &[f64]) -> MetricReport {
    assert!(!labels.is_empty(), "report on empty predictions");
    let c = confusion(labels, scores);
    let f1_fake = f1(c.tp, c.fp, c.fn_);
    let f1_real = f1(c.tn, c.fn_, c.fp);
    MetricReport {
        auc: auc(labels, scores),
        acc: (c.tp + c.tn) as f64 / c.total() as f64,
        macro_f1: (f1_real + f1_fake) / 2.0,
        f1_real,
        f1_fake,
        confusion: c,
    }
}
