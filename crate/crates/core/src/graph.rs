//! Per-user mobility graph: place labels as nodes weighted by visit count,
//! directed edges weighted by within-session transitions.
//!
//! Edges also carry the support of the matching length-2 pattern when one was
//! mined, so a renderer can choose either quantity for edge thickness.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::miner::SequentialPattern;
use crate::sessionize::VisitSequence;
use crate::taxonomy::LabeledVisit;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Node {
    pub label: String,
    pub visit_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub transition_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern_support: Option<usize>,
}

/// Nodes sorted by label, edges by `(from, to)`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct MobilityGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("session item {label:?} does not occur among the supplied visits")]
    Inconsistent { label: String },
}

impl MobilityGraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization is infallible")
    }

    pub fn node(&self, label: &str) -> Option<&Node> {
        self.nodes
            .binary_search_by(|n| n.label.as_str().cmp(label))
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn edge(&self, from: &str, to: &str) -> Option<&Edge> {
        self.edges
            .binary_search_by(|e| (e.from.as_str(), e.to.as_str()).cmp(&(from, to)))
            .ok()
            .map(|i| &self.edges[i])
    }

    pub fn total_visits(&self) -> usize {
        self.nodes.iter().map(|n| n.visit_count).sum()
    }

    pub fn total_transitions(&self) -> usize {
        self.edges.iter().map(|e| e.transition_count).sum()
    }
}

pub fn build_graph(
    visits: &[LabeledVisit],
    sessions: &[VisitSequence],
    patterns: &[SequentialPattern],
) -> Result<MobilityGraph, GraphError> {
    let mut nodes: BTreeMap<&str, usize> = BTreeMap::new();
    for visit in visits {
        *nodes.entry(visit.label.as_str()).or_default() += 1;
    }

    let mut edges: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for session in sessions {
        if let Some(missing) = session
            .items
            .iter()
            .find(|item| !nodes.contains_key(item.as_str()))
        {
            return Err(GraphError::Inconsistent {
                label: missing.clone(),
            });
        }
        for pair in session.items.windows(2) {
            *edges.entry((pair[0].as_str(), pair[1].as_str())).or_default() += 1;
        }
    }

    let pair_support: BTreeMap<(&str, &str), usize> = patterns
        .iter()
        .filter(|p| p.items.len() == 2)
        .map(|p| ((p.items[0].as_str(), p.items[1].as_str()), p.support))
        .collect();

    Ok(MobilityGraph {
        nodes: nodes
            .into_iter()
            .map(|(label, visit_count)| Node {
                label: label.to_string(),
                visit_count,
            })
            .collect(),
        edges: edges
            .into_iter()
            .map(|(key, transition_count)| Edge {
                from: key.0.to_string(),
                to: key.1.to_string(),
                transition_count,
                pattern_support: pair_support.get(&key).copied(),
            })
            .collect(),
    })
}
