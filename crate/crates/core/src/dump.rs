//! Per-article graph export: nodes, edges, learned edge weights, root
//! attention, and alignment attention, for external plotting.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::graph::NodeType;
use crate::message_passing::LayerTrace;
use crate::model::{forward, ModelParams, PreparedItem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpNode {
    pub index: usize,
    #[serde(rename = "type")]
    pub node_type: NodeType,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpLayer {
    /// Directed `(source, target)` messages.
    pub messages: Vec<(usize, usize)>,
    /// One weight per message.
    pub edge_weights: Vec<f64>,
    /// Root attention over nodes, absent without the global step.
    pub root_scores: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpGraph {
    pub nodes: Vec<DumpNode>,
    pub edges: Vec<(usize, usize)>,
    pub layers: Vec<DumpLayer>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpAlignLayer {
    /// `r x N`: pseudo rows attending over graph nodes.
    pub alpha_into: Vec<Vec<f64>>,
    /// `N x r`: graph rows attending over pseudo nodes.
    pub alpha_out: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpCommon {
    /// Semantic nodes, then intent nodes, then pseudo nodes.
    pub nodes: Vec<DumpNode>,
    /// `(pseudo, graph node)` pairs in common-graph indices.
    pub pseudo_edges: Vec<(usize, usize)>,
    pub layers: Vec<DumpAlignLayer>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDump {
    pub id: String,
    pub prob_fake: f64,
    pub semantic: DumpGraph,
    pub intent: DumpGraph,
    /// Fine-node attention over sentences, when fine nodes are enabled.
    pub fine_attention: Option<Vec<Vec<f64>>>,
    /// Pseudo-node alignment; absent when alignment is disabled.
    pub common: Option<DumpCommon>,
    /// Direct semantic-intent graph used when alignment is disabled.
    pub joint: Option<DumpGraph>,
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn layer(tape: &Tape<'_>, t: &LayerTrace) -> DumpLayer {
    let flat = |v: Option<Var>| v.map(|v| tape.value(v).iter().copied().collect::<Vec<f64>>());
    DumpLayer {
        messages: t.messages.clone(),
        edge_weights: flat(t.edge_weights).unwrap_or_default(),
        root_scores: flat(t.root_scores),
    }
}

/// Run the model on `item` and collect everything needed to draw its graphs.
/// `perspectives` labels the coarse intent nodes.
pub fn graph_dump(item: &PreparedItem, params: &ModelParams, perspectives: &[String]) -> Result<GraphDump> {
    let mut tape = Tape::with_params(&params.store);
    let tr = forward(&mut tape, item, params)?;

    let sem = &tr.semantic;
    let mut sem_nodes: Vec<DumpNode> = (0..sem.m)
        .map(|i| DumpNode {
            index: i,
            node_type: NodeType::Sentence,
            label: item.sentences[i].clone(),
        })
        .collect();
    sem_nodes.extend((0..sem.n).map(|j| DumpNode {
        index: sem.m + j,
        node_type: NodeType::Entity,
        label: item.entities[j].clone(),
    }));

    let int = &tr.intent;
    let name = |i: usize| perspectives.get(i).cloned().unwrap_or_else(|| format!("perspective{i}"));
    let mut int_nodes: Vec<DumpNode> = (0..int.k)
        .map(|i| DumpNode {
            index: i,
            node_type: NodeType::CoarseIntent,
            label: name(i),
        })
        .collect();
    int_nodes.extend((0..int.k * int.l).map(|f| DumpNode {
        index: int.k + f,
        node_type: NodeType::FineIntent,
        label: format!("{}/{}", name(f / int.l), f % int.l),
    }));

    let common = tr.common.as_ref().map(|c| {
        let ns = sem_nodes.len();
        let mut nodes: Vec<DumpNode> = sem_nodes
            .iter()
            .cloned()
            .chain(int_nodes.iter().map(|n| DumpNode {
                index: ns + n.index,
                ..n.clone()
            }))
            .collect();
        let ng = nodes.len();
        nodes.extend((0..c.r).map(|p| DumpNode {
            index: ng + p,
            node_type: NodeType::Pseudo,
            label: format!("pseudo{p}"),
        }));
        DumpCommon {
            nodes,
            pseudo_edges: c.pseudo_edges().into_iter().map(|(p, v)| (ng + p, v)).collect(),
            layers: tr
                .align_layers
                .iter()
                .map(|a| DumpAlignLayer {
                    alpha_into: rows(tape.value(a.alpha_into)),
                    alpha_out: rows(tape.value(a.alpha_out)),
                })
                .collect(),
        }
    });

    let joint = (!tr.joint_layers.is_empty()).then(|| {
        let ns = sem_nodes.len();
        DumpGraph {
            nodes: sem_nodes
                .iter()
                .cloned()
                .chain(int_nodes.iter().map(|n| DumpNode {
                    index: ns + n.index,
                    ..n.clone()
                }))
                .collect(),
            edges: tr.joint_edges.clone(),
            layers: tr.joint_layers.iter().map(|t| layer(&tape, t)).collect(),
        }
    });

    Ok(GraphDump {
        id: item.id.clone(),
        prob_fake: tape.scalar(tr.prob),
        semantic: DumpGraph {
            nodes: sem_nodes,
            edges: sem.edges(),
            layers: tr.semantic_layers.iter().map(|t| layer(&tape, t)).collect(),
        },
        intent: DumpGraph {
            nodes: int_nodes,
            edges: int.edges(),
            layers: tr.intent_layers.iter().map(|t| layer(&tape, t)).collect(),
        },
        fine_attention: tr.fine_attention.map(|a| rows(tape.value(a))),
        common,
        joint,
    })
}
