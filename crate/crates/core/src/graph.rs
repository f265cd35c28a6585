//! Node vocabulary and small topology helpers shared by all graphs.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Node types across the semantic, intent, and common graphs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeType {
    Sentence,
    Entity,
    CoarseIntent,
    FineIntent,
    Pseudo,
}

impl NodeType {
    pub const ALL: [NodeType; 5] = [
        NodeType::Sentence,
        NodeType::Entity,
        NodeType::CoarseIntent,
        NodeType::FineIntent,
        NodeType::Pseudo,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::Sentence => "sentence",
            NodeType::Entity => "entity",
            NodeType::CoarseIntent => "coarse_intent",
            NodeType::FineIntent => "fine_intent",
            NodeType::Pseudo => "pseudo",
        }
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownType(s.to_string()))
    }
}

/// Expand undirected edges into `(source, target)` message pairs, both
/// directions per edge.
pub fn directed_messages(edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect()
}

/// Breadth-first hop distances from `source` over undirected edges.
pub fn hop_distances(num_nodes: usize, edges: &[(usize, usize)], source: usize) -> Vec<Option<usize>> {
    let mut adj = vec![Vec::new(); num_nodes];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut dist = vec![None; num_nodes];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("visited");
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}
