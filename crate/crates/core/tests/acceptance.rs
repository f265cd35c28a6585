//! Acceptance gate. Each test checks one criterion and prints a single
//! `PASS` / `FAIL` line; run with `--nocapture` to see them.

#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::Rng;

use common::*;
use veracity_core::alignment::{align_step, edge_features, AlignLayer, CommonGraph, EdgeFeatureNet};
use veracity_core::autodiff::Tape;
use veracity_core::data::{chronological_split, Corpus, Label, NewsItem, SplitMode, SplitSpec, SyntheticSpec};
use veracity_core::graph::{hop_distances, NodeType};
use veracity_core::head::{bce_loss, mean_bce, pool_pseudo};
use veracity_core::intent_graph::update_fine_nodes;
use veracity_core::message_passing::{global_step, local_step, GlobalLayer, LocalLayer};
use veracity_core::metrics::{auc, report};
use veracity_core::model::{forward, item_loss, Ablation, ModelConfig, ModelParams, PreparedItem};
use veracity_core::semantic_graph::{local_edges, SemanticGraph, SentenceLinks};
use veracity_core::text::{extract_entities, CapitalizedRecognizer, RuleSegmenter, Segmenter};
use veracity_core::training::{evaluate, format_table, item_gradients, run_ablation, train, TrainConfig};

fn gate(n: u32, name: &str, outcome: Result<String, String>) {
    match outcome {
        Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
        Err(why) => {
            println!("FAIL criterion {n} ({name}): {why}");
            panic!("criterion {n} failed: {why}");
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// 1. gradient suite

fn loss_value(item: &PreparedItem, params: &ModelParams) -> f64 {
    let mut tape = Tape::with_params(&params.store);
    let (loss, _) = item_loss(&mut tape, item, params).expect("forward");
    tape.scalar(loss)
}

pub struct GradReport {
    pub worst: f64,
    pub tensors: usize,
    pub entries: usize,
    /// Entries skipped because the loss has a kink (ReLU or |x| at zero)
    /// within one step of the evaluation point.
    pub kinks: usize,
}

/// Largest per-tensor relative error `|a - n| / max(|a|, |n|)` over sampled
/// entries, with `n` from central differences.
fn gradient_check(item: &PreparedItem, params: &ModelParams, seed: u64) -> Result<GradReport, String> {
    const H: f64 = 1e-6;
    const SAMPLES: usize = 24;
    let mut rng = rng(seed);
    let (center, analytic) = item_gradients(item, params).map_err(|e| e.to_string())?;
    let mut rep = GradReport { worst: 0.0, tensors: 0, entries: 0, kinks: 0 };
    let ids: Vec<_> = params.store.ids().collect();
    for (t, &id) in ids.iter().enumerate() {
        let shape = params.store.get(id).dim();
        let total = shape.0 * shape.1;
        let picks: Vec<usize> = if total <= SAMPLES {
            (0..total).collect()
        } else {
            (0..SAMPLES).map(|_| rng.random_range(0..total)).collect()
        };
        let (mut diff2, mut a2, mut n2) = (0.0, 0.0, 0.0);
        for flat in picks {
            let (i, j) = (flat / shape.1, flat % shape.1);
            let mut p = params.clone();
            let x0 = p.store.get(id)[[i, j]];
            p.store.get_mut(id)[[i, j]] = x0 + H;
            let up = loss_value(item, &p);
            p.store.get_mut(id)[[i, j]] = x0 - H;
            let down = loss_value(item, &p);
            let (fwd, bwd) = ((up - center) / H, (center - down) / H);
            if (fwd - bwd).abs() > 1e-2 * fwd.abs().max(bwd.abs()) + 1e-5 {
                rep.kinks += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * H);
            let a = analytic[t][[i, j]];
            diff2 += (a - numeric).powi(2);
            a2 += a * a;
            n2 += numeric * numeric;
            rep.entries += 1;
        }
        let scale = a2.sqrt().max(n2.sqrt());
        if scale > 1e-9 {
            let rel = diff2.sqrt() / scale;
            rep.worst = rep.worst.max(rel);
            if rel > 1e-4 {
                return Err(format!(
                    "{}: relative error {rel:.3e} (|analytic| {:.3e}, |numeric| {:.3e})",
                    params.store.name(id),
                    a2.sqrt(),
                    n2.sqrt()
                ));
            }
        }
        rep.tensors += 1;
    }
    Ok(rep)
}

#[test]
fn criterion_1_gradient_suite() {
    let start = Instant::now();
    let variants = ["full", "no_global", "no_dpga", "no_fine_intent", "no_entity", "no_window"];
    let outcome = (|| {
        let mut rng = rng(101);
        let (mut worst, mut tensors, mut entries, mut kinks) = (0.0f64, 0, 0, 0);
        for round in 0..12 {
            let ablation: Ablation = variants[round % variants.len()].parse().unwrap();
            let m = rng.random_range(1..=5);
            let n = rng.random_range(0..=2);
            let k = rng.random_range(1..=2);
            let l = rng.random_range(1..=2);
            let r = rng.random_range(1..=2);
            let config = ModelConfig {
                dim: 8,
                window: rng.random_range(1..=2),
                k,
                intent_order: random_order(&mut rng, k),
                fine_l: l,
                pseudo_r: r,
                depth: 2,
                align_depth: 2,
                head_hidden: vec![8, 8],
                edge_hidden: 6,
                ablation,
                ..ModelConfig::default()
            };
            let label = if rng.random_bool(0.5) { Label::Fake } else { Label::Real };
            let item = random_item(&mut rng, m, n, k, 8, label);
            let params = ModelParams::init(config, 1000 + round as u64).map_err(|e| e.to_string())?;
            let rep = gradient_check(&item, &params, round as u64)
                .map_err(|e| format!("instance {round} ({ablation}, m={m} n={n} k={k} l={l} r={r}): {e}"))?;
            worst = worst.max(rep.worst);
            tensors += rep.tensors;
            entries += rep.entries;
            kinks += rep.kinks;
        }
        let secs = start.elapsed().as_secs_f64();
        ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
        ensure(kinks * 100 <= entries, || format!("{kinks} of {} entries sit on a kink", entries + kinks))?;
        Ok(format!(
            "12 instances, {tensors} tensors, {entries} entries ({kinks} at kinks skipped), worst relative error {worst:.2e}, {secs:.1}s"
        ))
    })();
    gate(1, "gradient suite", outcome);
}

// ---------------------------------------------------------------------------
// 2. oracle equivalence

const ORACLE_TOL: f64 = 1e-6;

fn check_local(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    let n = rng.random_range(1..=8);
    let d = rng.random_range(1..=6);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.4) {
                edges.push((i, j));
            }
        }
    }
    let h = randn(rng, n, d, 1.0);
    let ew = randn(rng, 3 * d, 1, 0.5);
    let eb = randn(rng, 1, 1, 0.5);
    let ws = randn(rng, d, d, 0.5);
    let wn = randn(rng, d, d, 0.5);
    let expect = local_step_oracle(&to_vec(&h), &edges, ew.as_slice().unwrap(), eb[[0, 0]], &to_vec(&ws), &to_vec(&wn));
    let mut tape = Tape::new();
    let hv = tape.constant(h);
    let layer = LocalLayer {
        edge_w: tape.constant(ew),
        edge_b: tape.constant(eb),
        w_self: tape.constant(ws),
        w_nbr: tape.constant(wn),
    };
    let out = local_step(&mut tape, hv, &edges, &layer);
    max_abs_diff(tape.value(out.h), &expect)
}

fn check_global(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    let n = rng.random_range(1..=8);
    let d = rng.random_range(1..=6);
    let h = randn(rng, n, d, 1.0);
    let root = randn(rng, 1, d, 1.0);
    let rw = randn(rng, d, 1, 1.0);
    let rb = randn(rng, 1, 1, 1.0);
    let pw = randn(rng, d, d, 0.5);
    let pb = randn(rng, 1, d, 0.5);
    let (eh, eroot, escores) =
        global_step_oracle(&to_vec(&h), root.as_slice().unwrap(), rw.as_slice().unwrap(), rb[[0, 0]], &to_vec(&pw), pb.as_slice().unwrap());
    let mut tape = Tape::new();
    let hv = tape.constant(h);
    let rv = tape.constant(root);
    let layer = GlobalLayer {
        root_w: tape.constant(rw),
        root_b: tape.constant(rb),
        psi_w: tape.constant(pw),
        psi_b: tape.constant(pb),
    };
    let out = global_step(&mut tape, hv, rv, &layer);
    max_abs_diff(tape.value(out.h), &eh)
        .max(max_abs_diff(tape.value(out.root), &vec![eroot]))
        .max(max_abs_diff(tape.value(out.scores), &vec![escores]))
}

fn check_fine(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    let k = rng.random_range(1..=4);
    let l = rng.random_range(1..=4);
    let m = rng.random_range(1..=6);
    let d = rng.random_range(1..=6);
    let base = randn(rng, k * l, d, 1.0);
    let coarse = randn(rng, k, d, 1.0);
    let sents = randn(rng, m, d, 1.0);
    let (ef, ea) = fine_oracle(&to_vec(&base), &to_vec(&coarse), &to_vec(&sents), l);
    let mut tape = Tape::new();
    let (b, c, s) = (tape.constant(base), tape.constant(coarse), tape.constant(sents));
    let up = update_fine_nodes(&mut tape, b, c, s, l).unwrap();
    max_abs_diff(tape.value(up.fine), &ef).max(max_abs_diff(tape.value(up.attention), &ea))
}

fn check_align(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    let n = rng.random_range(1..=7);
    let r = rng.random_range(1..=4);
    let d = rng.random_range(1..=6);
    let hidden = rng.random_range(1..=5);
    let type_slots: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
    let graph = randn(rng, n, d, 0.7);
    let pseudo = randn(rng, r, d, 0.7);
    let (nw1, nb1, nw2, nb2) = (
        randn(rng, 12, hidden, 0.5),
        randn(rng, 1, hidden, 0.5),
        randn(rng, hidden, d, 0.5),
        randn(rng, 1, d, 0.5),
    );
    let (fw1, fb1, fw2, fb2) = (randn(rng, d, d, 0.5), randn(rng, 1, d, 0.5), randn(rng, d, d, 0.5), randn(rng, 1, d, 0.5));
    let (nw1v, nw2v, fw1v, fw2v) = (to_vec(&nw1), to_vec(&nw2), to_vec(&fw1), to_vec(&fw2));
    let net_o = FfnOracle { w1: &nw1v, b1: nb1.as_slice().unwrap(), w2: &nw2v, b2: nb2.as_slice().unwrap() };
    let ffn_o = FfnOracle { w1: &fw1v, b1: fb1.as_slice().unwrap(), w2: &fw2v, b2: fb2.as_slice().unwrap() };
    let (eg, ep, ea, eb) = align_oracle(&to_vec(&graph), &to_vec(&pseudo), &type_slots, &net_o, &ffn_o);

    let mut tape = Tape::new();
    let net = EdgeFeatureNet {
        w1: tape.constant(nw1.clone()),
        b1: tape.constant(nb1.clone()),
        w2: tape.constant(nw2.clone()),
        b2: tape.constant(nb2.clone()),
    };
    let layer = AlignLayer {
        w1: tape.constant(fw1.clone()),
        b1: tape.constant(fb1.clone()),
        w2: tape.constant(fw2.clone()),
        b2: tape.constant(fb2.clone()),
    };
    let common = CommonGraph {
        node_types: type_slots.iter().map(|&t| NodeType::ALL[t]).collect(),
        r,
        num_semantic: 0,
    };
    let feats = edge_features(&mut tape, &common, &net);
    let (g, p) = (tape.constant(graph), tape.constant(pseudo));
    let out = align_step(&mut tape, g, p, &feats, &layer);
    max_abs_diff(tape.value(out.graph), &eg)
        .max(max_abs_diff(tape.value(out.pseudo), &ep))
        .max(max_abs_diff(tape.value(out.alpha_into), &ea))
        .max(max_abs_diff(tape.value(out.alpha_out), &eb))
}

fn check_pool(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    let r = rng.random_range(1..=9);
    let d = rng.random_range(1..=6);
    let h = randn(rng, r, d, 2.0);
    let expect = pool_oracle(&to_vec(&h));
    let mut tape = Tape::new();
    let hv = tape.constant(h);
    let p = pool_pseudo(&mut tape, hv);
    max_abs_diff(tape.value(p), &vec![expect])
}

fn check_bce(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    let n = rng.random_range(1..=16);
    let labels: Vec<Label> = (0..n).map(|_| if rng.random_bool(0.5) { Label::Fake } else { Label::Real }).collect();
    let probs: Vec<f64> = (0..n)
        .map(|_| match rng.random_range(0..10) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random::<f64>(),
        })
        .collect();
    let mut worst = 0.0f64;
    let mut total = 0.0;
    for (&y, &p) in labels.iter().zip(&probs) {
        let o = bce_oracle(y.as_f64(), p);
        total += o;
        worst = worst.max((bce_loss(y, p) - o).abs());
    }
    worst.max((mean_bce(&labels, &probs) - total / n as f64).abs())
}

#[test]
fn criterion_2_oracle_equivalence() {
    let start = Instant::now();
    type Check = fn(&mut rand_chacha::ChaCha8Rng) -> f64;
    let checks: [(&str, Check); 6] = [
        ("local_step", check_local),
        ("global_step", check_global),
        ("update_fine_nodes", check_fine),
        ("align_step", check_align),
        ("pool_pseudo", check_pool),
        ("bce_loss", check_bce),
    ];
    let outcome = (|| {
        let mut parts = Vec::new();
        for (i, (name, check)) in checks.iter().enumerate() {
            let mut rng = rng(200 + i as u64);
            let mut worst = 0.0f64;
            for case in 0..200 {
                let err = check(&mut rng);
                ensure(err <= ORACLE_TOL, || format!("{name} case {case}: error {err:.3e}"))?;
                worst = worst.max(err);
            }
            parts.push(format!("{name} {worst:.1e}"));
        }
        let secs = start.elapsed().as_secs_f64();
        ensure(secs < 30.0, || format!("took {secs:.1}s"))?;
        Ok(format!("200 instances each; worst errors: {}; {secs:.1}s", parts.join(", ")))
    })();
    gate(2, "oracle equivalence", outcome);
}

// ---------------------------------------------------------------------------
// 3. graph construction

const FIRST: &[&str] = &["Alice", "Bob", "Carmen", "Dmitri", "Eun", "Farah", "Gustav", "Hana"];
const FILLER: &[&str] = &["went home", "spoke at length", "was not available", "declined to comment", "left early"];

fn random_article(rng: &mut rand_chacha::ChaCha8Rng) -> String {
    let m = rng.random_range(1..=9);
    (0..m)
        .map(|_| {
            if rng.random_bool(0.6) {
                let a = FIRST[rng.random_range(0..FIRST.len())];
                let b = FIRST[rng.random_range(0..FIRST.len())];
                format!("{a} met {b} and {} .", FILLER[rng.random_range(0..FILLER.len())]).replace(" .", ".")
            } else {
                format!("the crowd {}.", FILLER[rng.random_range(0..FILLER.len())])
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn criterion_3_graph_construction() {
    let outcome = (|| {
        let mut cases = 0;
        for m in 0..=12usize {
            for w in 0..=4usize {
                let mut brute = Vec::new();
                for i in 0..m {
                    for j in 0..m {
                        if i < j && j - i <= w {
                            brute.push((i, j));
                        }
                    }
                }
                let got: BTreeSet<_> = local_edges(m, w).into_iter().collect();
                ensure(got == brute.iter().copied().collect::<BTreeSet<_>>(), || format!("m={m} w={w}"))?;
                ensure(local_edges(m, w).len() == brute.len(), || format!("duplicates at m={m} w={w}"))?;
                cases += 1;
            }
        }
        let mut rng = rng(303);
        let seg = RuleSegmenter::default();
        let mut pairs = 0;
        for a in 0..100 {
            let text = random_article(&mut rng);
            let sentences = seg.segment(&text).map_err(|e| e.to_string())?;
            let table = extract_entities(&sentences, &CapitalizedRecognizer, 32).map_err(|e| e.to_string())?;
            let m = sentences.len();
            let h = Array2::zeros((m + table.len(), 2));
            let w = rng.random_range(0..=2);
            let g = SemanticGraph::build(&h, m, &table.incidence, SentenceLinks::Window(w), true).map_err(|e| e.to_string())?;
            let edges = g.edges();
            for i in 0..m {
                let dist = hop_distances(g.num_nodes(), &edges, i);
                for j in i + 1..m {
                    let shares = table
                        .incidence
                        .iter()
                        .any(|&(s, e)| s == i && table.incidence.contains(&(j, e)));
                    if shares {
                        pairs += 1;
                        ensure(dist[j].is_some_and(|d| d <= 2), || format!("article {a}: sentences {i},{j} at {:?}", dist[j]))?;
                    }
                }
            }
        }
        ensure(pairs > 100, || format!("only {pairs} entity-sharing pairs generated"))?;
        Ok(format!("{cases} (m, w) grids match brute force; {pairs} entity-sharing pairs within 2 hops"))
    })();
    gate(3, "graph-construction oracles", outcome);
}

// ---------------------------------------------------------------------------
// 4. normalization

fn rows_are_distributions(a: &Array2<f64>) -> Result<(), String> {
    for (i, row) in a.rows().into_iter().enumerate() {
        let s: f64 = row.sum();
        ensure(row.iter().all(|&x| x >= 0.0), || format!("negative entry in row {i}"))?;
        ensure((s - 1.0).abs() <= 1e-6, || format!("row {i} sums to {s}"))?;
    }
    Ok(())
}

#[test]
fn criterion_4_normalization() {
    let outcome = (|| {
        let mut rng = rng(404);
        let (mut rows, mut weights) = (0usize, 0usize);
        for case in 0..60 {
            let ablation = if case % 3 == 2 { "no_dpga" } else { "full" };
            let k = rng.random_range(1..=4);
            let config = ModelConfig {
                k,
                intent_order: random_order(&mut rng, k),
                ablation: ablation.parse().unwrap(),
                ..small_config(12)
            };
            let m = rng.random_range(1..=8);
            let n = rng.random_range(0..=3);
            let item = random_item(&mut rng, m, n, k, 12, Label::Real);
            let params = ModelParams::init(config, case).map_err(|e| e.to_string())?;
            let mut tape = Tape::with_params(&params.store);
            let tr = forward(&mut tape, &item, &params).map_err(|e| e.to_string())?;
            let mut dists = Vec::new();
            if let Some(a) = tr.fine_attention {
                dists.push(tape.value(a).clone());
            }
            for l in tr.semantic_layers.iter().chain(&tr.intent_layers) {
                if let Some(s) = l.root_scores {
                    dists.push(tape.value(s).clone());
                }
            }
            for a in &tr.align_layers {
                dists.push(tape.value(a.alpha_into).clone());
                dists.push(tape.value(a.alpha_out).clone());
            }
            for d in &dists {
                rows_are_distributions(d).map_err(|e| format!("case {case}: {e}"))?;
                rows += d.nrows();
            }
            for l in tr.semantic_layers.iter().chain(&tr.intent_layers).chain(&tr.joint_layers) {
                if let Some(w) = l.edge_weights {
                    for &x in tape.value(w) {
                        ensure(x > 0.0 && x < 1.0, || format!("case {case}: edge weight {x}"))?;
                        weights += 1;
                    }
                }
            }
        }
        Ok(format!("{rows} attention rows sum to 1; {weights} edge weights in (0, 1)"))
    })();
    gate(4, "normalization invariants", outcome);
}

// ---------------------------------------------------------------------------
// 5. overfit

fn overfit_config() -> TrainConfig {
    TrainConfig {
        model: small_config(32),
        batch_size: 4,
        learning_rate: 1e-3,
        max_epochs: 200,
        patience: 200,
        seed: 7,
        eval_train: true,
        ..TrainConfig::default()
    }
}

#[test]
fn criterion_5_overfit() {
    let start = Instant::now();
    let outcome = (|| {
        let config = overfit_config();
        let items = prepared_corpus(&SyntheticSpec::separable(20, 5), &config.model);
        let mut reached = None;
        let out = veracity_core::training::train_with(&config, &items, &items, |rec| {
            if reached.is_none() && rec.train.is_some_and(|t| t.acc >= 0.95) {
                reached = Some(rec.epoch);
            }
        })
        .map_err(|e| e.to_string())?;
        let epoch = reached.ok_or_else(|| {
            let best = out.history.iter().filter_map(|r| r.train.map(|t| t.acc)).fold(0.0, f64::max);
            format!("train accuracy peaked at {best:.3}")
        })?;
        let final_acc = evaluate(&out.params, &items).map_err(|e| e.to_string())?.report.acc;
        let secs = start.elapsed().as_secs_f64();
        ensure(secs < 300.0, || format!("took {secs:.1}s"))?;
        ensure(final_acc >= 0.95, || format!("selected checkpoint has train accuracy {final_acc}"))?;
        Ok(format!("train accuracy >= 0.95 at epoch {epoch}; selected checkpoint {final_acc:.3}; {secs:.1}s"))
    })();
    gate(5, "overfit capability", outcome);
}

// ---------------------------------------------------------------------------
// 6. determinism

#[test]
fn criterion_6_determinism() {
    let outcome = (|| {
        let config = TrainConfig {
            model: small_config(16),
            batch_size: 8,
            learning_rate: 1e-3,
            max_epochs: 6,
            patience: 10,
            seed: 11,
            ..TrainConfig::default()
        };
        let items = prepared_corpus(&SyntheticSpec::separable(24, 9), &config.model);
        let (tr, va) = items.split_at(16);
        let a = train(&config, tr, va).map_err(|e| e.to_string())?;
        let b = train(&config, tr, va).map_err(|e| e.to_string())?;
        ensure(a.history.len() == b.history.len(), || "different epoch counts".into())?;
        let mut worst = 0.0f64;
        for (x, y) in a.history.iter().zip(&b.history) {
            worst = worst.max((x.train_loss - y.train_loss).abs()).max((x.val_loss - y.val_loss).abs());
        }
        ensure(worst <= 1e-9, || format!("per-epoch losses differ by {worst:.3e}"))?;
        ensure(a.val == b.val, || "final validation metrics differ".into())?;
        ensure(a.params == b.params, || "final parameters differ".into())?;
        Ok(format!("{} epochs, max loss difference {worst:.1e}, identical metrics", a.history.len()))
    })();
    gate(6, "determinism", outcome);
}

// ---------------------------------------------------------------------------
// 7. metric oracles

#[test]
fn criterion_7_metric_oracles() {
    let outcome = (|| {
        let mut rng = rng(707);
        let mut worst = 0.0f64;
        for case in 0..1000 {
            let n = rng.random_range(1..=60);
            let labels: Vec<Label> = (0..n).map(|_| if rng.random_bool(0.5) { Label::Fake } else { Label::Real }).collect();
            // coarse grid so ties are frequent
            let coarse = rng.random_bool(0.5);
            let scores: Vec<f64> = (0..n)
                .map(|_| if coarse { rng.random_range(0..5) as f64 / 4.0 } else { rng.random::<f64>() })
                .collect();
            let err = (auc(&labels, &scores) - auc_bruteforce(&labels, &scores)).abs();
            ensure(err <= 1e-9, || format!("case {case}: AUC error {err:.3e}"))?;
            worst = worst.max(err);
            let r = report(&labels, &scores);
            ensure((r.macro_f1 - (r.f1_real + r.f1_fake) / 2.0).abs() <= 1e-9, || format!("case {case}: macro F1 identity"))?;
            let c = r.confusion;
            ensure(c.total() == n && (r.acc - (c.tp + c.tn) as f64 / n as f64).abs() <= 1e-12, || format!("case {case}: accuracy identity"))?;
        }
        Ok(format!("1000 label/score sets, worst AUC error {worst:.1e}; report identities hold"))
    })();
    gate(7, "metric oracles", outcome);
}

// ---------------------------------------------------------------------------
// 8. ablation harness

#[test]
fn criterion_8_ablation_harness() {
    let outcome = (|| {
        let config = TrainConfig {
            model: small_config(16),
            batch_size: 8,
            learning_rate: 1e-3,
            max_epochs: 4,
            patience: 4,
            seed: 3,
            ..TrainConfig::default()
        };
        let items = prepared_corpus(&SyntheticSpec::separable(36, 13), &config.model);
        let (tr, rest) = items.split_at(24);
        let (va, te) = rest.split_at(6);
        let rows = run_ablation(&config, tr, va, te).map_err(|e| e.to_string())?;
        let names: Vec<&str> = rows.iter().map(|r| r.variant.as_str()).collect();
        ensure(
            names == ["full", "no_entity", "no_window", "no_fine_intent", "no_global", "no_dpga"],
            || format!("variants {names:?}"),
        )?;
        for r in &rows {
            ensure(r.test.is_some(), || format!("{} has no test report", r.variant))?;
        }
        let table = format_table(&rows);
        print!("{table}");
        ensure(table.lines().count() == 7, || "table has wrong number of lines".into())?;
        Ok("base and five variants trained under one seed; table emitted".into())
    })();
    gate(8, "ablation harness", outcome);
}

// ---------------------------------------------------------------------------
// 9. chronological split law

fn split_case() -> impl Strategy<Value = (Vec<Option<i64>>, f64, f64, bool, u64)> {
    (
        prop::collection::vec(0i64..40, 1..80).prop_map(|v| v.into_iter().map(Some).collect()),
        0.05f64..0.85,
        0.05f64..0.5,
        any::<bool>(),
        any::<u64>(),
    )
        .prop_filter("fractions must leave room for test", |(_, a, b, _, _)| a + b < 0.95)
}

#[test]
fn criterion_9_split_law() {
    let mut runner = TestRunner::new(PropConfig {
        cases: 1000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let result = runner.run(&split_case(), |(stamps, train, val, random, seed)| {
        let items: Vec<NewsItem> = stamps
            .iter()
            .enumerate()
            .map(|(i, ts)| {
                let mut it = NewsItem::new(format!("n{i}"), "Some text.", if i % 2 == 0 { Label::Real } else { Label::Fake });
                it.timestamp = *ts;
                it
            })
            .collect();
        let corpus = Corpus::new("p", items).unwrap();
        let mode = if random { SplitMode::Random } else { SplitMode::Chronological };
        let spec = SplitSpec::new(train, val, 1.0 - train - val, mode).unwrap().with_seed(seed);
        let s = chronological_split(&corpus, &spec).unwrap();
        let ids = |c: &Corpus| c.items.iter().map(|i| i.id.clone()).collect::<BTreeSet<_>>();
        let (a, b, c) = (ids(&s.train), ids(&s.val), ids(&s.test));
        prop_assert_eq!(a.len() + b.len() + c.len(), corpus.len());
        prop_assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        let all: BTreeSet<_> = a.union(&b).chain(c.iter()).cloned().collect();
        prop_assert_eq!(all, ids(&corpus));
        if !random {
            let ts = |c: &Corpus| c.items.iter().map(|i| i.timestamp.unwrap()).collect::<Vec<_>>();
            let (ta, tb, tc) = (ts(&s.train), ts(&s.val), ts(&s.test));
            for (lo, hi) in [(&ta, &tb), (&tb, &tc), (&ta, &tc)] {
                if let (Some(x), Some(y)) = (lo.iter().max(), hi.iter().min()) {
                    prop_assert!(x <= y);
                }
            }
        }
        Ok(())
    });
    let outcome = result
        .map(|_| "1000 generated corpora partition exactly with monotone timestamps".to_string())
        .map_err(|e| e.to_string());
    gate(9, "chronological split law", outcome);
}
