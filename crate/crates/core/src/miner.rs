//! Frequent sequential pattern mining over single-item sequences.
//!
//! PrefixSpan with pseudo-projection: a projected database is a list of
//! `(sequence, end positions)` entries instead of copied suffixes. Elements
//! are single labels rather than itemsets, and three constraints are applied
//! during the search:
//!
//! * `min_support`: sequence-level support, each sequence counted once;
//! * `max_pattern_length`: depth limit of the prefix growth;
//! * `max_gap`: at most `g` skipped items between consecutive pattern
//!   elements (`0` means contiguous). With a gap limit, the earliest embedding
//!   of a prefix is not enough to decide extensions, so every reachable end
//!   position of the prefix is kept in the projection.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::sessionize::VisitSequence;

pub const DEFAULT_MAX_PATTERN_LENGTH: usize = 10;

/// Minimum support, either as an absolute sequence count or as a fraction of
/// the number of sequences (rounded up).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinSupport {
    Absolute(usize),
    Relative(f64),
}

impl MinSupport {
    /// Converts to an absolute count for a database of `sequence_count`
    /// sequences.
    pub fn resolve(self, sequence_count: usize) -> Result<usize, MinerError> {
        match self {
            MinSupport::Absolute(0) => Err(MinerError::Config(
                "min_support must be at least 1".to_string(),
            )),
            MinSupport::Absolute(n) => Ok(n),
            MinSupport::Relative(f) if !(f > 0.0 && f <= 1.0) => Err(MinerError::Config(
                format!("relative min_support must be in (0, 1], got {f}"),
            )),
            MinSupport::Relative(f) => {
                // The epsilon keeps e.g. 0.1 * 30 from rounding up to 4.
                let scaled = (f * sequence_count as f64 - 1e-9).ceil();
                Ok((scaled.max(1.0)) as usize)
            }
        }
    }
}

impl fmt::Display for MinSupport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MinSupport::Absolute(n) => write!(f, "{n}"),
            MinSupport::Relative(r) => write!(f, "{r:?}"),
        }
    }
}

impl FromStr for MinSupport {
    type Err = MinerError;

    /// Integers are absolute counts; anything with a decimal point or
    /// exponent is a fraction.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(n) = s.parse::<usize>() {
            return Ok(MinSupport::Absolute(n));
        }
        match s.parse::<f64>() {
            Ok(f) if s.contains(['.', 'e', 'E']) => Ok(MinSupport::Relative(f)),
            _ => Err(MinerError::Config(format!("invalid min_support {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningConfig {
    pub min_support: MinSupport,
    pub max_pattern_length: usize,
    pub max_gap: Option<usize>,
}

impl MiningConfig {
    pub fn new(min_support: MinSupport) -> Self {
        MiningConfig {
            min_support,
            max_pattern_length: DEFAULT_MAX_PATTERN_LENGTH,
            max_gap: None,
        }
    }

    pub fn absolute(min_support: usize) -> Self {
        MiningConfig::new(MinSupport::Absolute(min_support))
    }

    pub fn with_max_pattern_length(mut self, max_pattern_length: usize) -> Self {
        self.max_pattern_length = max_pattern_length;
        self
    }

    pub fn with_max_gap(mut self, max_gap: Option<usize>) -> Self {
        self.max_gap = max_gap;
        self
    }

    /// Checks the config and resolves `min_support` for `sequence_count`
    /// sequences.
    pub fn validate(&self, sequence_count: usize) -> Result<usize, MinerError> {
        if self.max_pattern_length < 1 {
            return Err(MinerError::Config(
                "max_pattern_length must be at least 1".to_string(),
            ));
        }
        self.min_support.resolve(sequence_count)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MinerError {
    #[error("invalid mining config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SequentialPattern {
    pub items: Vec<String>,
    pub support: usize,
}

/// Canonical output order: support descending, then length ascending, then
/// items lexicographically.
pub fn canonical_order(a: &SequentialPattern, b: &SequentialPattern) -> std::cmp::Ordering {
    b.support
        .cmp(&a.support)
        .then(a.items.len().cmp(&b.items.len()))
        .then_with(|| a.items.cmp(&b.items))
}

pub fn patterns_to_json(patterns: &[SequentialPattern]) -> String {
    serde_json::to_string(patterns).expect("pattern serialization is infallible")
}

/// Mines the sessions of one user.
pub fn mine(
    sequences: &[VisitSequence],
    config: &MiningConfig,
) -> Result<Vec<SequentialPattern>, MinerError> {
    let items: Vec<&[String]> = sequences.iter().map(|s| s.items.as_slice()).collect();
    mine_sequences(&items, config)
}

/// Mines raw label sequences. Returns every pattern meeting the config, with
/// exact support, in canonical order.
pub fn mine_sequences<Q, S>(
    sequences: &[Q],
    config: &MiningConfig,
) -> Result<Vec<SequentialPattern>, MinerError>
where
    Q: AsRef<[S]>,
    S: AsRef<str>,
{
    let min_support = config.validate(sequences.len())?;
    if sequences.is_empty() || min_support > sequences.len() {
        return Ok(Vec::new());
    }

    let db = Database::intern(sequences);
    let mut search = Search {
        db: &db,
        min_support,
        max_len: config.max_pattern_length,
        max_gap: config.max_gap,
        prefix: Vec::new(),
        found: Vec::new(),
        levels: Vec::new(),
    };
    search.run();

    let mut found = search.found;
    found.sort_unstable_by(|(a, sa), (b, sb)| {
        sb.cmp(sa).then(a.len().cmp(&b.len())).then_with(|| a.cmp(b))
    });
    Ok(found
        .into_iter()
        .map(|(ids, support)| SequentialPattern {
            items: ids.iter().map(|&id| db.labels[id as usize].clone()).collect(),
            support,
        })
        .collect())
}

/// Sequences with labels replaced by dense ids. Ids follow the lexicographic
/// order of the labels, so id vectors compare like label vectors.
struct Database {
    labels: Vec<String>,
    sequences: Vec<Vec<u32>>,
}

impl Database {
    fn intern<Q, S>(sequences: &[Q]) -> Self
    where
        Q: AsRef<[S]>,
        S: AsRef<str>,
    {
        let distinct: BTreeSet<&str> = sequences
            .iter()
            .flat_map(|s| s.as_ref().iter().map(|l| l.as_ref()))
            .collect();
        let labels: Vec<String> = distinct.iter().map(|s| s.to_string()).collect();
        let id_of = |label: &str| labels.binary_search_by(|l| l.as_str().cmp(label)).unwrap() as u32;
        let sequences = sequences
            .iter()
            .map(|s| s.as_ref().iter().map(|l| id_of(l.as_ref())).collect())
            .collect();
        Database { labels, sequences }
    }
}

/// Pseudo-projected database: one entry per supporting sequence, each with
/// the ascending end positions (in `ends[lo..hi]`) of the prefix embeddings
/// that may still be extended.
#[derive(Debug, Default)]
struct Projection {
    entries: Vec<Entry>,
    ends: Vec<u32>,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    seq: u32,
    lo: u32,
    hi: u32,
}

impl Projection {
    fn support(&self) -> usize {
        self.entries.len()
    }

    fn clear(&mut self) {
        self.entries.clear();
        self.ends.clear();
    }

    /// Records that the grown prefix ends at `pos` in `seq`. Calls for one
    /// sequence must be consecutive with ascending positions.
    fn push(&mut self, seq: u32, pos: u32, keep_all: bool) {
        let end_idx = self.ends.len() as u32;
        match self.entries.last_mut() {
            Some(last) if last.seq == seq => {
                if keep_all && self.ends[last.hi as usize - 1] < pos {
                    self.ends.push(pos);
                    last.hi += 1;
                }
            }
            _ => {
                self.ends.push(pos);
                self.entries.push(Entry {
                    seq,
                    lo: end_idx,
                    hi: end_idx + 1,
                });
            }
        }
    }
}

/// Per-depth scratch space: one projection bucket per item plus the list of
/// buckets touched during the current scan.
#[derive(Default)]
struct Level {
    buckets: Vec<Projection>,
    touched: Vec<u32>,
}

struct Search<'a> {
    db: &'a Database,
    min_support: usize,
    max_len: usize,
    max_gap: Option<usize>,
    prefix: Vec<u32>,
    found: Vec<(Vec<u32>, usize)>,
    levels: Vec<Level>,
}

impl Search<'_> {
    fn run(&mut self) {
        let keep_all = self.max_gap.is_some();
        let depth = 0;
        self.ensure_level(depth);
        let mut level = std::mem::take(&mut self.levels[depth]);
        for (seq_idx, seq) in self.db.sequences.iter().enumerate() {
            for (pos, &item) in seq.iter().enumerate() {
                let bucket = &mut level.buckets[item as usize];
                if bucket.entries.is_empty() {
                    level.touched.push(item);
                }
                bucket.push(seq_idx as u32, pos as u32, keep_all);
            }
        }
        self.expand_level(&mut level);
        self.levels[depth] = level;
    }

    fn ensure_level(&mut self, depth: usize) {
        while self.levels.len() <= depth {
            let mut level = Level::default();
            level
                .buckets
                .resize_with(self.db.labels.len(), Projection::default);
            self.levels.push(level);
        }
    }

    /// Emits every frequent bucket of `level` as `prefix + item` and recurses.
    /// Leaves all buckets cleared.
    fn expand_level(&mut self, level: &mut Level) {
        level.touched.sort_unstable();
        for &item in &level.touched {
            let projection = &mut level.buckets[item as usize];
            let support = projection.support();
            if support >= self.min_support {
                self.prefix.push(item);
                self.found.push((self.prefix.clone(), support));
                if self.prefix.len() < self.max_len {
                    self.grow(projection);
                }
                self.prefix.pop();
            }
            projection.clear();
        }
        level.touched.clear();
    }

    /// Scans the projection of the current prefix and buckets every possible
    /// one-item extension.
    fn grow(&mut self, projection: &Projection) {
        let depth = self.prefix.len();
        self.ensure_level(depth);
        let mut level = std::mem::take(&mut self.levels[depth]);
        let db = self.db;
        let sequences = &db.sequences;

        match self.max_gap {
            None => {
                for entry in &projection.entries {
                    let seq = &sequences[entry.seq as usize];
                    let start = projection.ends[entry.lo as usize] as usize + 1;
                    for (offset, &item) in seq[start..].iter().enumerate() {
                        let bucket = &mut level.buckets[item as usize];
                        match bucket.entries.last() {
                            Some(last) if last.seq == entry.seq => continue,
                            None => level.touched.push(item),
                            _ => {}
                        }
                        bucket.push(entry.seq, (start + offset) as u32, false);
                    }
                }
            }
            Some(gap) => {
                for entry in &projection.entries {
                    let seq = &sequences[entry.seq as usize];
                    let mut next = 0usize;
                    for &end in &projection.ends[entry.lo as usize..entry.hi as usize] {
                        let from = next.max(end as usize + 1);
                        let to = (end as usize + 1 + gap).min(seq.len().saturating_sub(1));
                        for (pos, &item) in seq.iter().enumerate().take(to + 1).skip(from) {
                            let bucket = &mut level.buckets[item as usize];
                            if bucket.entries.is_empty() {
                                level.touched.push(item);
                            }
                            bucket.push(entry.seq, pos as u32, true);
                        }
                        next = next.max(to + 1);
                    }
                }
            }
        }

        self.expand_level(&mut level);
        self.levels[depth] = level;
    }
}

/// Number of sequences containing `pattern` as a subsequence, with at most
/// `max_gap` skipped items between consecutive elements when given.
///
/// Direct scan over each sequence, independent of the projection machinery
/// used by [`mine`].
pub fn count_support<Q, S, P>(pattern: &[P], sequences: &[Q], max_gap: Option<usize>) -> usize
where
    Q: AsRef<[S]>,
    S: AsRef<str>,
    P: AsRef<str>,
{
    sequences
        .iter()
        .filter(|s| contains(s.as_ref(), pattern, max_gap))
        .count()
}

/// Whether `pattern` embeds in `sequence` under the gap rule.
pub fn contains<S: AsRef<str>, P: AsRef<str>>(
    sequence: &[S],
    pattern: &[P],
    max_gap: Option<usize>,
) -> bool {
    let Some((first, rest)) = pattern.split_first() else {
        return true;
    };
    match max_gap {
        None => {
            // Greedy leftmost matching is exact without a gap limit.
            let mut it = sequence.iter();
            pattern
                .iter()
                .all(|p| it.any(|s| s.as_ref() == p.as_ref()))
        }
        Some(gap) => {
            // reachable[i]: some embedding of the pattern so far ends at i.
            let mut reachable: Vec<bool> = sequence
                .iter()
                .map(|s| s.as_ref() == first.as_ref())
                .collect();
            for p in rest {
                let mut next = vec![false; sequence.len()];
                let mut any = false;
                for (i, s) in sequence.iter().enumerate() {
                    if s.as_ref() != p.as_ref() {
                        continue;
                    }
                    let lo = i.saturating_sub(gap + 1);
                    if reachable[lo..i].iter().any(|&r| r) {
                        next[i] = true;
                        any = true;
                    }
                }
                if !any {
                    return false;
                }
                reachable = next;
            }
            reachable.iter().any(|&r| r)
        }
    }
}
