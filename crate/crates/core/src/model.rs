//! Model configuration, parameter layout, per-article preparation, and the
//! end-to-end forward pass.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{align_step, build_common_graph, edge_features, AlignLayer, CommonGraph, EdgeFeatureNet};
use crate::autodiff::{Tape, Var};
use crate::data::{Label, NewsItem};
use crate::encoders::{HashEncoder, IntentCache, IntentGenerator, Perspective, PromptSet, StubGenerator, TextEncoder};
use crate::error::{Error, Result};
use crate::head::{pool_pseudo, predict, HeadLayers, Prediction, BCE_EPS};
use crate::intent_graph::{init_coarse_nodes, update_fine_nodes, validate_order, IntentGraph};
use crate::message_passing::{dual_update, local_step, DualStack, GlobalLayer, LayerTrace, LocalLayer};
use crate::params::{scaled_normal, uniform_fan_in, ParamStore};
use crate::semantic_graph::{init_semantic_nodes, SemanticGraph, SentenceLinks};
use crate::text::{extract_entities, CapitalizedRecognizer, Recognizer, RuleSegmenter, Segmenter};

/// Component switches for the ablation variants. All `false` is the full
/// model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    /// Drop entity nodes and sentence-entity edges.
    pub no_entity: bool,
    /// Link every pair of sentences instead of a sliding window.
    pub no_window: bool,
    /// Keep only coarse intent nodes.
    pub no_fine_intent: bool,
    /// Skip the super-root step in every layer.
    pub no_global: bool,
    /// Replace pseudo-node alignment with direct semantic-intent edges.
    pub no_dpga: bool,
}

/// Flag names accepted by [`Ablation::set`], in table order.
pub const ABLATION_FLAGS: [&str; 5] = ["no_entity", "no_window", "no_fine_intent", "no_global", "no_dpga"];

impl Ablation {
    pub fn set(&mut self, flag: &str) -> Result<()> {
        let slot = match flag.replace('-', "_").as_str() {
            "no_entity" => &mut self.no_entity,
            "no_window" => &mut self.no_window,
            "no_fine_intent" => &mut self.no_fine_intent,
            "no_global" => &mut self.no_global,
            "no_dpga" => &mut self.no_dpga,
            _ => return Err(Error::InvalidConfig(format!("unknown ablation flag {flag:?}"))),
        };
        *slot = true;
        Ok(())
    }

    pub fn only(flag: &str) -> Result<Self> {
        let mut a = Ablation::default();
        a.set(flag)?;
        Ok(a)
    }

    pub fn is_full(&self) -> bool {
        *self == Ablation::default()
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let on = [self.no_entity, self.no_window, self.no_fine_intent, self.no_global, self.no_dpga];
        let names: Vec<&str> = ABLATION_FLAGS.iter().zip(on).filter(|(_, b)| *b).map(|(n, _)| *n).collect();
        if names.is_empty() {
            f.write_str("full")
        } else {
            f.write_str(&names.join("+"))
        }
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut a = Ablation::default();
        if s != "full" && !s.is_empty() {
            for flag in s.split(['+', ',']) {
                a.set(flag.trim())?;
            }
        }
        Ok(a)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Embedding width `d`; must equal the encoder's output width.
    pub dim: usize,
    /// Sentence window `w`.
    pub window: usize,
    /// Number of perspectives `k`.
    pub k: usize,
    /// Chain over perspectives as a permutation of `0..k`.
    pub intent_order: Vec<usize>,
    /// Fine nodes per perspective `l`.
    pub fine_l: usize,
    /// Pseudo nodes `r`.
    pub pseudo_r: usize,
    /// Dual-update layers per graph.
    pub depth: usize,
    /// Alignment layers (or direct joint layers without alignment).
    pub align_depth: usize,
    pub head_hidden: Vec<usize>,
    /// Hidden width of the pseudo-edge feature network.
    pub edge_hidden: usize,
    pub max_entities: usize,
    pub ablation: Ablation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 256,
            window: 2,
            k: 4,
            // belief, plan, desire, outcome in prompt order; chained
            // belief -> desire -> plan -> outcome
            intent_order: vec![0, 2, 1, 3],
            fine_l: 4,
            pseudo_r: 8,
            depth: 3,
            align_depth: 2,
            head_hidden: vec![128, 128],
            edge_hidden: 64,
            max_entities: crate::text::DEFAULT_MAX_ENTITIES,
            ablation: Ablation::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.k == 0 {
            return bad("at least one perspective is required");
        }
        validate_order(&self.intent_order, self.k)?;
        if self.fine_l == 0 && !self.ablation.no_fine_intent {
            return bad("fine_l must be positive unless fine intents are disabled");
        }
        if self.pseudo_r == 0 {
            return bad("pseudo_r must be positive");
        }
        if self.edge_hidden == 0 || self.head_hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }

    /// Fine nodes per perspective after ablation.
    pub fn effective_l(&self) -> usize {
        if self.ablation.no_fine_intent {
            0
        } else {
            self.fine_l
        }
    }

    pub fn sentence_links(&self) -> SentenceLinks {
        if self.ablation.no_window {
            SentenceLinks::Complete
        } else {
            SentenceLinks::Window(self.window)
        }
    }

    /// Config with `k` and the chain taken from a prompt set.
    pub fn with_prompts(mut self, prompts: &crate::encoders::PromptSet) -> Result<Self> {
        self.k = prompts.len();
        self.intent_order = prompts.chain_order()?;
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Uniform with the fan-in bound.
    Uniform,
    /// Normal scaled by `1/sqrt(d)`.
    Normal,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: (usize, usize),
    pub init: Init,
}

/// Every learnable tensor the configuration needs, in canonical order.
pub fn param_layout(c: &ModelConfig) -> Vec<TensorSpec> {
    let d = c.dim;
    let mut out = Vec::new();
    let mut add = |name: String, shape, init| out.push(TensorSpec { name, shape, init });
    let global = !c.ablation.no_global;
    for g in ["sem", "int"] {
        if global {
            add(format!("{g}.root"), (1, d), Init::Normal);
        }
        for i in 0..c.depth {
            let p = format!("{g}.layer{i}");
            add(format!("{p}.edge_w"), (3 * d, 1), Init::Uniform);
            add(format!("{p}.edge_b"), (1, 1), Init::Zero);
            add(format!("{p}.w_self"), (d, d), Init::Uniform);
            add(format!("{p}.w_nbr"), (d, d), Init::Uniform);
            if global {
                add(format!("{p}.root_w"), (d, 1), Init::Uniform);
                add(format!("{p}.root_b"), (1, 1), Init::Zero);
                add(format!("{p}.psi_w"), (d, d), Init::Uniform);
                add(format!("{p}.psi_b"), (1, d), Init::Zero);
            }
        }
    }
    if !c.ablation.no_fine_intent {
        add("intent.fine_base".into(), (c.k * c.fine_l, d), Init::Normal);
    }
    if c.ablation.no_dpga {
        for i in 0..c.align_depth {
            let p = format!("joint.layer{i}");
            add(format!("{p}.edge_w"), (3 * d, 1), Init::Uniform);
            add(format!("{p}.edge_b"), (1, 1), Init::Zero);
            add(format!("{p}.w_self"), (d, d), Init::Uniform);
            add(format!("{p}.w_nbr"), (d, d), Init::Uniform);
        }
    } else {
        let h = c.edge_hidden;
        add("align.pseudo_base".into(), (c.pseudo_r, d), Init::Normal);
        add("align.edge_net.w1".into(), (crate::alignment::EDGE_FEATURE_INPUTS, h), Init::Uniform);
        add("align.edge_net.b1".into(), (1, h), Init::Zero);
        add("align.edge_net.w2".into(), (h, d), Init::Uniform);
        add("align.edge_net.b2".into(), (1, d), Init::Zero);
        for i in 0..c.align_depth {
            let p = format!("align.layer{i}");
            add(format!("{p}.ffn_w1"), (d, d), Init::Uniform);
            add(format!("{p}.ffn_b1"), (1, d), Init::Zero);
            add(format!("{p}.ffn_w2"), (d, d), Init::Uniform);
            add(format!("{p}.ffn_b2"), (1, d), Init::Zero);
        }
    }
    let mut prev = d;
    for (j, &w) in c.head_hidden.iter().enumerate() {
        add(format!("head.w{j}"), (prev, w), Init::Uniform);
        add(format!("head.b{j}"), (1, w), Init::Zero);
        prev = w;
    }
    add("head.out_w".into(), (prev, 1), Init::Uniform);
    add("head.out_b".into(), (1, 1), Init::Zero);
    out
}

/// Configuration together with its learnable tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub store: ParamStore,
}

impl ModelParams {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (config.dim as f64).sqrt();
        let mut store = ParamStore::new();
        for spec in param_layout(&config) {
            let (r, c) = spec.shape;
            let t = match spec.init {
                Init::Uniform => uniform_fan_in(&mut rng, r, c),
                Init::Normal => scaled_normal(&mut rng, r, c, scale),
                Init::Zero => Array2::zeros((r, c)),
            };
            store.insert(spec.name, t);
        }
        Ok(ModelParams { config, store })
    }

    /// Check that the store holds exactly the tensors the config requires.
    pub fn check_layout(&self) -> Result<()> {
        let layout = param_layout(&self.config);
        if layout.len() != self.store.len() {
            return Err(Error::SchemaMismatch {
                expected: format!("{} tensors", layout.len()),
                found: format!("{} tensors", self.store.len()),
            });
        }
        for spec in layout {
            match self.store.by_name(&spec.name) {
                None => {
                    return Err(Error::SchemaMismatch {
                        expected: spec.name,
                        found: "missing".into(),
                    })
                }
                Some(t) if t.dim() != spec.shape => {
                    return Err(Error::SchemaMismatch {
                        expected: format!("{} with shape {:?}", spec.name, spec.shape),
                        found: format!("{:?}", t.dim()),
                    })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// Text processing and frozen encoders needed to prepare an article.
#[derive(Clone, Copy)]
pub struct Components<'a> {
    pub segmenter: &'a dyn Segmenter,
    pub recognizer: &'a dyn Recognizer,
    pub encoder: &'a dyn TextEncoder,
    pub generator: &'a dyn IntentGenerator,
    pub cache: &'a IntentCache,
    pub prompts: &'a [Perspective],
}

/// Fully offline components: rule segmenter, capitalization recognizer,
/// hash encoder, stub generator, and an in-memory intent cache.
pub struct OfflineComponents {
    pub segmenter: RuleSegmenter,
    pub recognizer: CapitalizedRecognizer,
    pub encoder: HashEncoder,
    pub generator: StubGenerator,
    pub cache: IntentCache,
    pub prompts: PromptSet,
}

impl OfflineComponents {
    pub fn new(dim: usize, prompts: PromptSet) -> Result<Self> {
        prompts.validate()?;
        Ok(OfflineComponents {
            segmenter: RuleSegmenter::default(),
            recognizer: CapitalizedRecognizer,
            encoder: HashEncoder::new(dim)?,
            generator: StubGenerator::default(),
            cache: IntentCache::in_memory(),
            prompts,
        })
    }

    pub fn components(&self) -> Components<'_> {
        Components {
            segmenter: &self.segmenter,
            recognizer: &self.recognizer,
            encoder: &self.encoder,
            generator: &self.generator,
            cache: &self.cache,
            prompts: &self.prompts.perspectives,
        }
    }
}

/// Everything about an article the trainable model needs. The encoders are
/// frozen, so this is computed once per article.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedItem {
    pub id: String,
    pub label: Label,
    pub sentences: Vec<String>,
    pub entities: Vec<String>,
    /// `(m + n) x d`: sentences then entities.
    pub semantic: Array2<f64>,
    /// `(sentence, entity)` mentions.
    pub incidence: BTreeSet<(usize, usize)>,
    /// `k x d` coarse intent embeddings in prompt order.
    pub coarse: Array2<f64>,
}

impl PreparedItem {
    pub fn m(&self) -> usize {
        self.sentences.len()
    }
}

pub fn prepare_item(item: &NewsItem, comps: &Components<'_>, config: &ModelConfig) -> Result<PreparedItem> {
    if comps.encoder.dim() != config.dim {
        return Err(Error::InvalidConfig(format!(
            "encoder width {} differs from model dim {}",
            comps.encoder.dim(),
            config.dim
        )));
    }
    if comps.prompts.len() != config.k {
        return Err(Error::InvalidConfig(format!(
            "{} prompts for k = {}",
            comps.prompts.len(),
            config.k
        )));
    }
    let sentences = comps.segmenter.segment(&item.text)?;
    let entities = extract_entities(&sentences, comps.recognizer, config.max_entities)?;
    let semantic = init_semantic_nodes(&sentences, &entities, comps.encoder)?;
    let coarse = init_coarse_nodes(item, comps.prompts, comps.generator, comps.encoder, comps.cache)?;
    Ok(PreparedItem {
        id: item.id.clone(),
        label: item.label,
        sentences: sentences.sentences,
        entities: entities.entities,
        semantic,
        incidence: entities.incidence,
        coarse,
    })
}

/// Prepare many articles in parallel; output order follows input order.
pub fn prepare_items(items: &[NewsItem], comps: &Components<'_>, config: &ModelConfig) -> Result<Vec<PreparedItem>> {
    items.par_iter().map(|it| prepare_item(it, comps, config)).collect()
}

/// Parameters placed on a tape.
struct Bound {
    sem: DualStack,
    int: DualStack,
    fine_base: Option<Var>,
    pseudo_base: Option<Var>,
    edge_net: Option<EdgeFeatureNet>,
    align: Vec<AlignLayer>,
    joint: Vec<LocalLayer>,
    head: HeadLayers,
}

fn bind(tape: &mut Tape<'_>, params: &ModelParams) -> Bound {
    let c = &params.config;
    let store = &params.store;
    let mut p = |name: &str| {
        let id = store.id(name).unwrap_or_else(|| panic!("parameter {name} missing from store"));
        tape.param(id)
    };
    let global = !c.ablation.no_global;
    let stack = |g: &str, p: &mut dyn FnMut(&str) -> Var| DualStack {
        root: global.then(|| p(&format!("{g}.root"))),
        layers: (0..c.depth)
            .map(|i| {
                let pre = format!("{g}.layer{i}");
                let local = LocalLayer {
                    edge_w: p(&format!("{pre}.edge_w")),
                    edge_b: p(&format!("{pre}.edge_b")),
                    w_self: p(&format!("{pre}.w_self")),
                    w_nbr: p(&format!("{pre}.w_nbr")),
                };
                let gl = global.then(|| GlobalLayer {
                    root_w: p(&format!("{pre}.root_w")),
                    root_b: p(&format!("{pre}.root_b")),
                    psi_w: p(&format!("{pre}.psi_w")),
                    psi_b: p(&format!("{pre}.psi_b")),
                });
                (local, gl)
            })
            .collect(),
    };
    let sem = stack("sem", &mut p);
    let int = stack("int", &mut p);
    let fine_base = (!c.ablation.no_fine_intent).then(|| p("intent.fine_base"));
    let (pseudo_base, edge_net, align, joint) = if c.ablation.no_dpga {
        let joint = (0..c.align_depth)
            .map(|i| LocalLayer {
                edge_w: p(&format!("joint.layer{i}.edge_w")),
                edge_b: p(&format!("joint.layer{i}.edge_b")),
                w_self: p(&format!("joint.layer{i}.w_self")),
                w_nbr: p(&format!("joint.layer{i}.w_nbr")),
            })
            .collect();
        (None, None, Vec::new(), joint)
    } else {
        let net = EdgeFeatureNet {
            w1: p("align.edge_net.w1"),
            b1: p("align.edge_net.b1"),
            w2: p("align.edge_net.w2"),
            b2: p("align.edge_net.b2"),
        };
        let align = (0..c.align_depth)
            .map(|i| AlignLayer {
                w1: p(&format!("align.layer{i}.ffn_w1")),
                b1: p(&format!("align.layer{i}.ffn_b1")),
                w2: p(&format!("align.layer{i}.ffn_w2")),
                b2: p(&format!("align.layer{i}.ffn_b2")),
            })
            .collect();
        (Some(p("align.pseudo_base")), Some(net), align, Vec::new())
    };
    let head = HeadLayers {
        hidden: (0..c.head_hidden.len())
            .map(|j| (p(&format!("head.w{j}")), p(&format!("head.b{j}"))))
            .collect(),
        out_w: p("head.out_w"),
        out_b: p("head.out_b"),
    };
    Bound {
        sem,
        int,
        fine_base,
        pseudo_base,
        edge_net,
        align,
        joint,
        head,
    }
}

/// Attention matrices of one alignment layer.
pub struct AlignTrace {
    /// `r x N` graph → pseudo.
    pub alpha_into: Var,
    /// `N x r` pseudo → graph.
    pub alpha_out: Var,
}

/// Forward-pass values kept for losses, tests, and graph dumps.
pub struct ForwardTrace {
    pub prob: Var,
    pub logit: Var,
    pub semantic: SemanticGraph,
    pub intent: IntentGraph,
    pub common: Option<CommonGraph>,
    /// Fine-node attention over sentences, `(k l) x m`.
    pub fine_attention: Option<Var>,
    pub semantic_layers: Vec<LayerTrace>,
    pub intent_layers: Vec<LayerTrace>,
    pub align_layers: Vec<AlignTrace>,
    /// Edges of the direct joint graph when alignment is disabled.
    pub joint_edges: Vec<(usize, usize)>,
    pub joint_layers: Vec<LayerTrace>,
    /// Final pseudo embeddings, `r x d`.
    pub pseudo: Option<Var>,
}

/// Run the model on one prepared article.
pub fn forward(tape: &mut Tape<'_>, item: &PreparedItem, params: &ModelParams) -> Result<ForwardTrace> {
    let c = &params.config;
    let b = bind(tape, params);
    let m = item.m();
    let k = c.k;
    if item.coarse.dim() != (k, c.dim) {
        return Err(Error::ShapeMismatch(format!(
            "coarse embeddings {:?}, model expects ({k}, {})",
            item.coarse.dim(),
            c.dim
        )));
    }
    if item.semantic.ncols() != c.dim {
        return Err(Error::ShapeMismatch(format!(
            "semantic embeddings of width {}, model dim {}",
            item.semantic.ncols(),
            c.dim
        )));
    }
    let semantic = SemanticGraph::build(
        &item.semantic,
        m,
        &item.incidence,
        c.sentence_links(),
        !c.ablation.no_entity,
    )?;
    let l = c.effective_l();
    let intent = IntentGraph::build(k, l, &c.intent_order)?;

    let h_sem = tape.constant(semantic.embeddings.clone());
    let coarse = tape.constant(item.coarse.clone());
    let (h_int, fine_attention) = match b.fine_base {
        Some(base) => {
            let sentences = tape.constant(item.semantic.slice(s![..m, ..]).to_owned());
            let up = update_fine_nodes(tape, base, coarse, sentences, l)?;
            (tape.concat_rows(&[coarse, up.fine]), Some(up.attention))
        }
        None => (coarse, None),
    };

    let sem_out = dual_update(tape, h_sem, &semantic.edges(), &b.sem);
    let int_out = dual_update(tape, h_int, &intent.edges(), &b.int);
    let graph = tape.concat_rows(&[sem_out.h, int_out.h]);

    let mut trace = ForwardTrace {
        prob: graph,
        logit: graph,
        semantic,
        intent,
        common: None,
        fine_attention,
        semantic_layers: sem_out.layers,
        intent_layers: int_out.layers,
        align_layers: Vec::new(),
        joint_edges: Vec::new(),
        joint_layers: Vec::new(),
        pseudo: None,
    };

    let pooled = if c.ablation.no_dpga {
        let ns = trace.semantic.num_nodes();
        let ni = trace.intent.num_nodes();
        let mut edges = trace.semantic.edges();
        edges.extend(trace.intent.edges().into_iter().map(|(a, b)| (ns + a, ns + b)));
        edges.extend((0..ns).flat_map(|u| (0..ni).map(move |v| (u, ns + v))));
        let mut h = graph;
        for layer in &b.joint {
            let out = local_step(tape, h, &edges, layer);
            h = out.h;
            trace.joint_layers.push(LayerTrace {
                messages: out.messages,
                edge_weights: out.weights,
                root_scores: None,
            });
        }
        trace.joint_edges = edges;
        tape.mean_rows(h)
    } else {
        let common = build_common_graph(&trace.semantic, &trace.intent, c.pseudo_r)?;
        let net = b.edge_net.expect("alignment parameters bound");
        let feats = edge_features(tape, &common, &net);
        let mut g = graph;
        let mut p = b.pseudo_base.expect("alignment parameters bound");
        for layer in &b.align {
            let out = align_step(tape, g, p, &feats, layer);
            g = out.graph;
            p = out.pseudo;
            trace.align_layers.push(AlignTrace {
                alpha_into: out.alpha_into,
                alpha_out: out.alpha_out,
            });
        }
        trace.common = Some(common);
        trace.pseudo = Some(p);
        pool_pseudo(tape, p)
    };
    let out = predict(tape, pooled, &b.head);
    trace.prob = out.prob;
    trace.logit = out.logit;
    Ok(trace)
}

/// Loss node and trace for one labeled article.
pub fn item_loss(tape: &mut Tape<'_>, item: &PreparedItem, params: &ModelParams) -> Result<(Var, ForwardTrace)> {
    let trace = forward(tape, item, params)?;
    let loss = tape.bce(trace.prob, item.label.as_f64(), BCE_EPS);
    Ok((loss, trace))
}

pub fn predict_item(item: &PreparedItem, params: &ModelParams) -> Result<Prediction> {
    let mut tape = Tape::with_params(&params.store);
    let trace = forward(&mut tape, item, params)?;
    let prob_fake = tape.scalar(trace.prob);
    Ok(Prediction {
        prob_fake,
        logit: tape.scalar(trace.logit),
        label_pred: Label::from_prob(prob_fake),
    })
}
