//! Versioned in-memory dataset store.
//!
//! Readers clone an `Arc<Snapshot>` and work from it for the whole request,
//! so a response is always computed from exactly one version. Writers
//! (uploads, taxonomy switches) are serialized, build a complete new snapshot
//! off to the side, and publish it with a single pointer swap.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use lru::LruCache;

use crate::graph::MobilityGraph;
use crate::ingest::{ingest_bytes, render_line, IngestReport, Ingested, UserHistory};
use crate::miner::{MinSupport, MinerError, MiningConfig, SequentialPattern};
use crate::pipeline::{graph_annotation_config, PipelineError, UserData, UserStats, UserSummary};
use crate::sessionize::SessionOptions;
use crate::taxonomy::LabelTaxonomy;

pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 16 * 1024 * 1024;
const MEMO_CAPACITY: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown user {0:?}")]
    UnknownUser(String),
    #[error(transparent)]
    Config(#[from] MinerError),
    #[error("upload of {size} bytes exceeds the limit of {limit} bytes")]
    TooLarge { size: usize, limit: usize },
    #[error("no line of the upload could be parsed ({} lines)", .0.total_lines)]
    NoValidLines(IngestReport),
    #[error("pipeline inconsistency: {0}")]
    Pipeline(#[from] PipelineError),
    #[error("upload persistence failed: {0}")]
    Io(#[from] std::io::Error),
}

/// One immutable dataset version.
#[derive(Debug)]
pub struct Snapshot {
    pub version: u64,
    pub taxonomy: Arc<LabelTaxonomy>,
    pub session_options: SessionOptions,
    pub users: BTreeMap<String, Arc<UserData>>,
}

impl Snapshot {
    pub fn user(&self, user_id: &str) -> Result<&Arc<UserData>, StoreError> {
        self.users
            .get(user_id)
            .ok_or_else(|| StoreError::UnknownUser(user_id.to_string()))
    }

    /// All users, most records first, ties by id.
    pub fn list_users(&self) -> Vec<UserSummary> {
        let mut list: Vec<UserSummary> = self.users.values().map(|u| u.summary()).collect();
        list.sort_by(|a, b| {
            b.record_count
                .cmp(&a.record_count)
                .then_with(|| a.user_id.cmp(&b.user_id))
        });
        list
    }

    pub fn record_count(&self) -> usize {
        self.users.values().map(|u| u.history.records.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct MemoKey {
    user_id: String,
    version: u64,
    min_support: usize,
    max_len: usize,
    max_gap: Option<usize>,
}

pub struct DatasetStore {
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
    memo: Mutex<LruCache<MemoKey, Arc<Vec<SequentialPattern>>>>,
    upload_dir: Option<PathBuf>,
    max_upload_bytes: usize,
}

impl DatasetStore {
    pub fn new(
        users: BTreeMap<String, UserHistory>,
        taxonomy: LabelTaxonomy,
        session_options: SessionOptions,
    ) -> Self {
        let users = users
            .into_iter()
            .map(|(id, history)| {
                let data = UserData::build(history, &taxonomy, session_options);
                (id, Arc::new(data))
            })
            .collect();
        let snapshot = Snapshot {
            version: 1,
            taxonomy: Arc::new(taxonomy),
            session_options,
            users,
        };
        DatasetStore {
            current: RwLock::new(Arc::new(snapshot)),
            writer: Mutex::new(()),
            memo: Mutex::new(LruCache::new(
                NonZeroUsize::new(MEMO_CAPACITY).expect("non-zero capacity"),
            )),
            upload_dir: None,
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
        }
    }

    pub fn empty() -> Self {
        DatasetStore::new(BTreeMap::new(), LabelTaxonomy::identity(), SessionOptions::default())
    }

    pub fn from_ingested(ingested: Ingested, taxonomy: LabelTaxonomy) -> Self {
        DatasetStore::new(ingested.users, taxonomy, SessionOptions::default())
    }

    pub fn with_max_upload_bytes(mut self, limit: usize) -> Self {
        self.max_upload_bytes = limit;
        self
    }

    /// Persists every accepted upload as `upload-<version>.tsv` under `dir`.
    pub fn with_upload_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.upload_dir = Some(dir.into());
        self
    }

    pub fn max_upload_bytes(&self) -> usize {
        self.max_upload_bytes
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.current.read().expect("snapshot lock poisoned"))
    }

    pub fn version(&self) -> u64 {
        self.snapshot().version
    }

    /// Canonical patterns for one user of `snapshot`, memoized per
    /// (user, version, resolved config).
    pub fn patterns(
        &self,
        snapshot: &Snapshot,
        user_id: &str,
        config: &MiningConfig,
    ) -> Result<Arc<Vec<SequentialPattern>>, StoreError> {
        let user = snapshot.user(user_id)?;
        let key = MemoKey {
            user_id: user_id.to_string(),
            version: snapshot.version,
            min_support: config.validate(user.sessions.len())?,
            max_len: config.max_pattern_length,
            max_gap: config.max_gap,
        };
        if let Some(hit) = self.memo.lock().expect("memo lock poisoned").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let patterns = Arc::new(user.patterns(config)?);
        self.memo
            .lock()
            .expect("memo lock poisoned")
            .put(key, Arc::clone(&patterns));
        Ok(patterns)
    }

    pub fn graph(
        &self,
        snapshot: &Snapshot,
        user_id: &str,
        min_support: MinSupport,
        max_gap: Option<usize>,
    ) -> Result<MobilityGraph, StoreError> {
        let user = snapshot.user(user_id)?;
        let pairs = self.patterns(
            snapshot,
            user_id,
            &graph_annotation_config(min_support, max_gap),
        )?;
        Ok(crate::graph::build_graph(&user.visits, &user.sessions, &pairs)
            .map_err(PipelineError::from)?)
    }

    pub fn stats(
        &self,
        snapshot: &Snapshot,
        user_id: &str,
        config: &MiningConfig,
    ) -> Result<UserStats, StoreError> {
        let user = snapshot.user(user_id)?;
        let patterns = self.patterns(snapshot, user_id, config)?;
        Ok(user.stats_from(&patterns))
    }

    pub fn clear_memo(&self) {
        self.memo.lock().expect("memo lock poisoned").clear();
    }

    /// Ingests a TSV payload and publishes a new snapshot containing the
    /// merged histories. On any error the current snapshot is left untouched.
    pub fn upload(&self, body: &[u8]) -> Result<(IngestReport, u64), StoreError> {
        if body.len() > self.max_upload_bytes {
            return Err(StoreError::TooLarge {
                size: body.len(),
                limit: self.max_upload_bytes,
            });
        }
        let ingested = ingest_bytes(body);
        if ingested.report.parsed == 0 {
            return Err(StoreError::NoValidLines(ingested.report));
        }
        let report = ingested.report;

        let _guard = self.writer.lock().expect("writer lock poisoned");
        let base = self.snapshot();
        let version = base.version + 1;
        if let Some(dir) = &self.upload_dir {
            persist_upload(dir, version, &ingested)?;
        }

        self.publish(merged(&base, ingested.users));
        Ok((report, version))
    }

    /// Relabels every user under `taxonomy` and publishes the result.
    pub fn switch_taxonomy(&self, taxonomy: LabelTaxonomy) -> u64 {
        let _guard = self.writer.lock().expect("writer lock poisoned");
        let base = self.snapshot();
        let users = base
            .users
            .iter()
            .map(|(id, u)| {
                let data = UserData::build(u.history.clone(), &taxonomy, base.session_options);
                (id.clone(), Arc::new(data))
            })
            .collect();
        let version = base.version + 1;
        self.publish(Snapshot {
            version,
            taxonomy: Arc::new(taxonomy),
            session_options: base.session_options,
            users,
        });
        version
    }

    /// Re-applies persisted uploads from `dir` in file-name order. Returns the
    /// number of files applied.
    pub fn replay_uploads(&self, dir: &Path) -> Result<usize, StoreError> {
        if !dir.exists() {
            return Ok(0);
        }
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("upload-") && n.ends_with(".tsv"))
            })
            .collect();
        files.sort();
        let mut applied = 0;
        for file in files {
            let bytes = fs::read(&file)?;
            // Replayed files are already on disk; do not write them again.
            let ingested = ingest_bytes(&bytes);
            if ingested.report.parsed == 0 {
                continue;
            }
            let _guard = self.writer.lock().expect("writer lock poisoned");
            let base = self.snapshot();
            self.publish(merged(&base, ingested.users));
            applied += 1;
        }
        Ok(applied)
    }

    fn publish(&self, snapshot: Snapshot) {
        *self.current.write().expect("snapshot lock poisoned") = Arc::new(snapshot);
    }
}

/// Next version of `base` with `incoming` histories merged in. Users not in
/// `incoming` share their data with `base`.
fn merged(base: &Snapshot, incoming: BTreeMap<String, UserHistory>) -> Snapshot {
    let mut users = base.users.clone();
    for (user_id, update) in incoming {
        let mut history = users
            .get(&user_id)
            .map(|u| u.history.clone())
            .unwrap_or_else(|| UserHistory::new(user_id.clone()));
        history.merge(update.records);
        let data = UserData::build(history, &base.taxonomy, base.session_options);
        users.insert(user_id, Arc::new(data));
    }
    Snapshot {
        version: base.version + 1,
        taxonomy: Arc::clone(&base.taxonomy),
        session_options: base.session_options,
        users,
    }
}

fn persist_upload(dir: &Path, version: u64, ingested: &Ingested) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    for history in ingested.users.values() {
        for record in &history.records {
            writeln!(tmp, "{}", render_line(record))?;
        }
    }
    tmp.persist(dir.join(format!("upload-{version:010}.tsv")))
        .map_err(|e| e.error)?;
    Ok(())
}
