//! Per-user derived data and the queries shared by the CLI and the service.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::graph::{build_graph, GraphError, MobilityGraph};
use crate::ingest::UserHistory;
use crate::miner::{mine, MinSupport, MinerError, MiningConfig, SequentialPattern};
use crate::sessionize::{sessionize, SessionOptions, VisitSequence};
use crate::taxonomy::{relabel, LabelTaxonomy, LabeledVisit};

/// Support threshold used for graph edge annotations and statistics when the
/// caller does not give one.
pub const DEFAULT_SUMMARY_MIN_SUPPORT: usize = 2;

/// Number of patterns reported in [`UserStats::top_patterns`].
pub const TOP_PATTERNS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Miner(#[from] MinerError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A user's history together with everything derived from it under one
/// taxonomy.
#[derive(Debug, Clone, PartialEq)]
pub struct UserData {
    pub history: UserHistory,
    pub visits: Vec<LabeledVisit>,
    pub sessions: Vec<VisitSequence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserSummary {
    pub user_id: String,
    pub record_count: usize,
    pub first_time: Option<DateTime<Utc>>,
    pub last_time: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserStats {
    pub record_count: usize,
    pub distinct_labels: usize,
    pub session_count: usize,
    pub top_patterns: Vec<SequentialPattern>,
}

impl UserStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stats serialization is infallible")
    }
}

impl UserData {
    pub fn build(history: UserHistory, taxonomy: &LabelTaxonomy, options: SessionOptions) -> Self {
        let visits = relabel(&history, taxonomy);
        let sessions = sessionize(&visits, options);
        UserData {
            history,
            visits,
            sessions,
        }
    }

    pub fn user_id(&self) -> &str {
        &self.history.user_id
    }

    pub fn summary(&self) -> UserSummary {
        UserSummary {
            user_id: self.history.user_id.clone(),
            record_count: self.history.records.len(),
            first_time: self.history.first_time(),
            last_time: self.history.last_time(),
        }
    }

    pub fn patterns(&self, config: &MiningConfig) -> Result<Vec<SequentialPattern>, MinerError> {
        mine(&self.sessions, config)
    }

    /// Graph with length-2 pattern supports mined at `min_support` / `max_gap`.
    pub fn graph(
        &self,
        min_support: MinSupport,
        max_gap: Option<usize>,
    ) -> Result<MobilityGraph, PipelineError> {
        let config = graph_annotation_config(min_support, max_gap);
        let pairs = self.patterns(&config)?;
        Ok(build_graph(&self.visits, &self.sessions, &pairs)?)
    }

    /// Statistics whose `top_patterns` are the first [`TOP_PATTERNS`] of
    /// `patterns` (already in canonical order).
    pub fn stats_from(&self, patterns: &[SequentialPattern]) -> UserStats {
        let labels: BTreeSet<&str> = self.visits.iter().map(|v| v.label.as_str()).collect();
        UserStats {
            record_count: self.history.records.len(),
            distinct_labels: labels.len(),
            session_count: self.sessions.len(),
            top_patterns: patterns.iter().take(TOP_PATTERNS).cloned().collect(),
        }
    }

    pub fn stats(&self, config: &MiningConfig) -> Result<UserStats, MinerError> {
        Ok(self.stats_from(&self.patterns(config)?))
    }
}

/// Length-2 patterns are all the graph needs.
pub fn graph_annotation_config(min_support: MinSupport, max_gap: Option<usize>) -> MiningConfig {
    MiningConfig::new(min_support)
        .with_max_pattern_length(2)
        .with_max_gap(max_gap)
}
