//! Optimization loop, evaluation, and the ablation and sweep harnesses.

use std::fmt::Write as _;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::data::Label;
use crate::error::{Error, Result};
use crate::head::{mean_bce, Prediction};
use crate::metrics::{report, MetricReport};
use crate::model::{item_loss, predict_item, Ablation, ModelConfig, ModelParams, PreparedItem, ABLATION_FLAGS};
use crate::params::ParamStore;

/// Items whose gradients are held in memory at once.
const GRAD_CHUNK: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Also score the training split after every epoch.
    pub eval_train: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            batch_size: 64,
            learning_rate: 2e-4,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            max_epochs: 100,
            patience: 10,
            seed: 42,
            eval_train: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let ok = self.batch_size > 0
            && self.learning_rate > 0.0
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.adam_eps > 0.0
            && self.max_epochs > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("training hyperparameters out of range".into()))
        }
    }
}

/// Adaptive-moment optimizer with decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamW {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    step: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamW {
    pub fn new(store: &ParamStore, config: &TrainConfig) -> Self {
        let zeros: Vec<Array2<f64>> = store.iter().map(|(_, t)| Array2::zeros(t.dim())).collect();
        AdamW {
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.adam_eps,
            weight_decay: config.weight_decay,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One update; `grads[i]` belongs to the `i`-th tensor of the store.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Array2<f64>]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (i, id) in store.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let theta = store.get_mut(id);
            let (m, v, g) = (&mut self.m[i], &mut self.v[i], &grads[i]);
            ndarray::Zip::from(theta).and(m).and(v).and(g).for_each(|t, m, v, &g| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *t -= self.lr * (mhat / (vhat.sqrt() + self.eps) + self.weight_decay * *t);
            });
        }
    }
}

/// Loss and per-tensor gradients for one article.
pub fn item_gradients(item: &PreparedItem, params: &ModelParams) -> Result<(f64, Vec<Array2<f64>>)> {
    let mut tape = Tape::with_params(&params.store);
    let (loss, _) = item_loss(&mut tape, item, params)?;
    let value = tape.scalar(loss);
    let grads = tape.backward(loss);
    let per_tensor = params
        .store
        .ids()
        .map(|id| grads.param(id).cloned().unwrap_or_else(|| Array2::zeros(params.store.get(id).dim())))
        .collect();
    Ok((value, per_tensor))
}

/// Mean loss and mean gradients over a batch. Items run in parallel; sums
/// are taken in batch order so results do not depend on scheduling.
pub fn batch_gradients(items: &[&PreparedItem], params: &ModelParams) -> Result<(f64, Vec<Array2<f64>>)> {
    let mut total: Vec<Array2<f64>> = params.store.iter().map(|(_, t)| Array2::zeros(t.dim())).collect();
    let mut loss = 0.0;
    for chunk in items.chunks(GRAD_CHUNK) {
        let results: Vec<_> = chunk
            .par_iter()
            .map(|it| item_gradients(it, params))
            .collect::<Result<_>>()?;
        for (l, g) in results {
            loss += l;
            for (acc, gi) in total.iter_mut().zip(g) {
                *acc += &gi;
            }
        }
    }
    let n = items.len() as f64;
    for g in &mut total {
        *g /= n;
    }
    Ok((loss / n, total))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: MetricReport,
    pub loss: f64,
    pub predictions: Vec<(String, Prediction)>,
}

pub fn evaluate(params: &ModelParams, items: &[PreparedItem]) -> Result<Evaluation> {
    if items.is_empty() {
        return Err(Error::EmptySplit);
    }
    let preds: Vec<Prediction> = items
        .par_iter()
        .map(|it| predict_item(it, params))
        .collect::<Result<_>>()?;
    let labels: Vec<Label> = items.iter().map(|it| it.label).collect();
    let probs: Vec<f64> = preds.iter().map(|p| p.prob_fake).collect();
    Ok(Evaluation {
        report: report(&labels, &probs),
        loss: mean_bce(&labels, &probs),
        predictions: items.iter().map(|it| it.id.clone()).zip(preds).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the batch losses seen during the epoch.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val: MetricReport,
    pub train: Option<MetricReport>,
    pub improved: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub params: ModelParams,
    pub best_epoch: usize,
    pub val: MetricReport,
    pub history: Vec<EpochRecord>,
}

/// Train from a seeded initialization. The epoch with the highest
/// validation macro F1 is kept; training stops once more than `patience`
/// consecutive epochs fail to improve on it.
pub fn train(config: &TrainConfig, train_items: &[PreparedItem], val_items: &[PreparedItem]) -> Result<TrainOutcome> {
    train_with(config, train_items, val_items, |_| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_with(
    config: &TrainConfig,
    train_items: &[PreparedItem],
    val_items: &[PreparedItem],
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if !(train_items.iter().any(|i| i.label == Label::Real) && train_items.iter().any(|i| i.label == Label::Fake)) {
        return Err(Error::SingleClassTrainSet);
    }
    if val_items.is_empty() {
        return Err(Error::EmptySplit);
    }
    let mut params = ModelParams::init(config.model.clone(), config.seed)?;
    let mut opt = AdamW::new(&params.store, config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..train_items.len()).collect();

    let mut best: Option<(f64, usize, ModelParams, MetricReport)> = None;
    let mut stale = 0;
    let mut history = Vec::new();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut losses = Vec::new();
        for batch in order.chunks(config.batch_size) {
            let items: Vec<&PreparedItem> = batch.iter().map(|&i| &train_items[i]).collect();
            let (loss, grads) = batch_gradients(&items, &params)?;
            opt.step(&mut params.store, &grads);
            losses.push(loss);
        }
        if !params.store.all_finite() {
            return Err(Error::InvalidConfig(format!("parameters diverged in epoch {epoch}")));
        }
        let val = evaluate(&params, val_items)?;
        let train_report = if config.eval_train {
            Some(evaluate(&params, train_items)?.report)
        } else {
            None
        };
        let improved = best.as_ref().is_none_or(|b| val.report.macro_f1 > b.0);
        let record = EpochRecord {
            epoch,
            train_loss: losses.iter().sum::<f64>() / losses.len() as f64,
            val_loss: val.loss,
            val: val.report,
            train: train_report,
            improved,
        };
        log::info!(
            "epoch {epoch}: train_loss={:.6} val_loss={:.6} val_macro_f1={:.4}",
            record.train_loss,
            record.val_loss,
            record.val.macro_f1
        );
        on_epoch(&record);
        history.push(record);
        if improved {
            best = Some((val.report.macro_f1, epoch, params.clone(), val.report));
            stale = 0;
        } else {
            stale += 1;
            if stale > config.patience {
                break;
            }
        }
    }
    let (_, best_epoch, params, val) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        params,
        best_epoch,
        val,
        history,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub variant: String,
    pub ablation: Ablation,
    pub best_epoch: usize,
    pub val: MetricReport,
    pub test: Option<MetricReport>,
}

/// The full model followed by each single-flag variant.
pub fn ablation_variants() -> Vec<(String, Ablation)> {
    std::iter::once(("full".to_string(), Ablation::default()))
        .chain(
            ABLATION_FLAGS
                .iter()
                .map(|f| (f.to_string(), Ablation::only(f).expect("known flag"))),
        )
        .collect()
}

/// Train the base model and each ablation variant with the same seed.
pub fn run_ablation(
    config: &TrainConfig,
    train_items: &[PreparedItem],
    val_items: &[PreparedItem],
    test_items: &[PreparedItem],
) -> Result<Vec<VariantResult>> {
    ablation_variants()
        .into_iter()
        .map(|(name, ablation)| {
            let mut cfg = config.clone();
            cfg.model.ablation = ablation;
            let out = train(&cfg, train_items, val_items)?;
            let test = if test_items.is_empty() {
                None
            } else {
                Some(evaluate(&out.params, test_items)?.report)
            };
            log::info!("variant {name}: val macro_f1 {:.4}", out.val.macro_f1);
            Ok(VariantResult {
                variant: name,
                ablation,
                best_epoch: out.best_epoch,
                val: out.val,
                test,
            })
        })
        .collect()
}

/// Plain-text comparison table.
pub fn format_table(rows: &[VariantResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:>6} {:>7} {:>7} {:>9} {:>8} {:>8}",
        "variant", "epoch", "auc", "acc", "macro_f1", "f1_real", "f1_fake"
    );
    for r in rows {
        let m = r.test.as_ref().unwrap_or(&r.val);
        let _ = writeln!(
            s,
            "{:<16} {:>6} {:>7.4} {:>7.4} {:>9.4} {:>8.4} {:>8.4}",
            r.variant, r.best_epoch, m.auc, m.acc, m.macro_f1, m.f1_real, m.f1_fake
        );
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    FineL,
    PseudoR,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: SweepParam,
    pub value: usize,
    pub best_epoch: usize,
    pub val: MetricReport,
    pub test: Option<MetricReport>,
}

/// Retrain once per grid value of `l` or `r`.
pub fn sweep(
    config: &TrainConfig,
    param: SweepParam,
    values: &[usize],
    train_items: &[PreparedItem],
    val_items: &[PreparedItem],
    test_items: &[PreparedItem],
) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&value| {
            let mut cfg = config.clone();
            match param {
                SweepParam::FineL => cfg.model.fine_l = value,
                SweepParam::PseudoR => cfg.model.pseudo_r = value,
            }
            let out = train(&cfg, train_items, val_items)?;
            let test = if test_items.is_empty() {
                None
            } else {
                Some(evaluate(&out.params, test_items)?.report)
            };
            Ok(SweepPoint {
                param,
                value,
                best_epoch: out.best_epoch,
                val: out.val,
                test,
            })
        })
        .collect()
}
