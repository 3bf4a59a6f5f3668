//! Shared generators and brute-force oracles for the integration suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use mobility::miner::{canonical_order, count_support, MinSupport, MiningConfig, SequentialPattern};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn labels(row: &str) -> Vec<String> {
    row.chars().map(|c| c.to_string()).collect()
}

pub fn db(rows: &[&str]) -> Vec<Vec<String>> {
    rows.iter().map(|r| labels(r)).collect()
}

pub fn pattern(items: &str, support: usize) -> SequentialPattern {
    SequentialPattern {
        items: labels(items),
        support,
    }
}

/// A random mining problem in the small regime where brute force is cheap.
#[derive(Debug, Clone)]
pub struct Instance {
    pub sequences: Vec<Vec<String>>,
    pub config: MiningConfig,
}

pub fn random_instance(rng: &mut impl Rng) -> Instance {
    let alphabet: Vec<String> = ["A", "B", "C", "D", "E"][..rng.gen_range(1..=5)]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let sequences = (0..rng.gen_range(0..=8))
        .map(|_| {
            (0..rng.gen_range(1..=6))
                .map(|_| alphabet.choose(rng).unwrap().clone())
                .collect()
        })
        .collect();
    let min_support = *[1, 2, 3].choose(rng).unwrap();
    let max_gap = *[None, Some(0), Some(1)].choose(rng).unwrap();
    let config = MiningConfig::absolute(min_support)
        .with_max_pattern_length(rng.gen_range(1..=7))
        .with_max_gap(max_gap);
    Instance { sequences, config }
}

fn absolute(config: &MiningConfig, n: usize) -> usize {
    match config.min_support {
        MinSupport::Absolute(k) => k,
        MinSupport::Relative(_) => config.validate(n).unwrap(),
    }
}

/// Enumerates every label string over the instance alphabet up to the
/// length cap, scores each with `count_support`, and keeps the frequent ones.
/// Only zero-support candidates are pruned: an extension of a pattern that
/// never occurs cannot occur either.
pub fn exhaustive_oracle(sequences: &[Vec<String>], config: &MiningConfig) -> Vec<SequentialPattern> {
    let alphabet: BTreeSet<&String> = sequences.iter().flatten().collect();
    let min_support = absolute(config, sequences.len());
    let mut out = Vec::new();
    let mut stack: Vec<Vec<String>> = alphabet.iter().map(|l| vec![(*l).clone()]).collect();
    while let Some(candidate) = stack.pop() {
        let support = count_support(&candidate, sequences, config.max_gap);
        if support == 0 {
            continue;
        }
        if support >= min_support {
            out.push(SequentialPattern {
                items: candidate.clone(),
                support,
            });
        }
        if candidate.len() < config.max_pattern_length {
            for l in &alphabet {
                let mut next = candidate.clone();
                next.push((*l).clone());
                stack.push(next);
            }
        }
    }
    out.sort_by(canonical_order);
    out
}

/// Second oracle that never calls library code: every index subset of every
/// sequence, kept when the chosen indices respect the gap rule.
pub fn subset_oracle(sequences: &[Vec<String>], config: &MiningConfig) -> BTreeMap<Vec<String>, usize> {
    let min_support = absolute(config, sequences.len());
    let mut counts: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    for seq in sequences {
        let mut seen = BTreeSet::new();
        for mask in 1u32..(1 << seq.len()) {
            let idx: Vec<usize> = (0..seq.len()).filter(|i| mask & (1 << i) != 0).collect();
            if idx.len() > config.max_pattern_length {
                continue;
            }
            let ok = idx
                .windows(2)
                .all(|w| config.max_gap.is_none_or(|g| w[1] - w[0] - 1 <= g));
            if ok {
                seen.insert(idx.iter().map(|&i| seq[i].clone()).collect::<Vec<_>>());
            }
        }
        for p in seen {
            *counts.entry(p).or_default() += 1;
        }
    }
    counts.retain(|_, c| *c >= min_support);
    counts
}

const CATEGORIES: &[&str] = &[
    "Bar",
    "Office",
    "Home (private)",
    "Subway",
    "Gym / Fitness Center",
    "Coffee Shop",
    "Café",
    "Thai Restaurant",
    "Caysorn Thai Restaurant",
    "Pizza Place",
    "Deli / Bodega",
    "Train Station",
    "Bus Station",
    "Park",
    "Grocery Store",
    "College Academic Building",
    "Chinese Restaurant",
    "Mexican Restaurant",
    "Sushi Restaurant",
    "Bakery",
    "Clothing Store",
    "Movie Theater",
    "Hotel",
    "Airport",
    "Church",
    "Hospital",
    "Library",
    "Museum",
    "Neighborhood",
    "Building",
    "Food & Drink Shop",
    "Drugstore / Pharmacy",
    "Bank",
    "Salon / Barbershop",
    "Stadium",
    "Music Venue",
    "Plaza",
    "Road",
    "Bridge",
    "Residential Building (Apartment / Condo)",
];

/// Parameters of the bundled stand-in for the public NYC check-in file.
pub const SYNTHETIC_RECORDS: usize = 227_428;
pub const SYNTHETIC_USERS: usize = 1_083;
pub const SYNTHETIC_TOP_USER_RECORDS: usize = 2_697;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Malformed {
    pub field_count: usize,
    pub numeric: usize,
    pub timestamp: usize,
}

impl Malformed {
    pub fn total(&self) -> usize {
        self.field_count + self.numeric + self.timestamp
    }
}

pub struct SyntheticDataset {
    /// windows-1252 encoded file contents.
    pub bytes: Vec<u8>,
    pub valid: usize,
    pub malformed: Malformed,
    pub users: usize,
    pub top_user: String,
    pub top_user_records: usize,
}

impl SyntheticDataset {
    pub fn write_to(&self, dir: &std::path::Path) -> std::path::PathBuf {
        let path = dir.join("synthetic_checkins.tsv");
        std::fs::File::create(&path)
            .and_then(|mut f| f.write_all(&self.bytes))
            .expect("write synthetic dataset");
        path
    }
}

/// Deterministic check-in file with routine-driven daily visits, time-sorted
/// globally like the public file, in windows-1252 with interleaved malformed
/// lines.
pub fn synthetic_dataset(seed: u64, users: usize, records: usize, top_user_records: usize) -> SyntheticDataset {
    let mut rng = rng(seed);
    let mut counts = vec![top_user_records];
    let rest = users - 1;
    let mut drawn: Vec<usize> = (0..rest).map(|_| rng.gen_range(100..=316)).collect();
    let target = records - top_user_records;
    let mut sum: usize = drawn.iter().sum();
    let mut i = 0;
    while sum != target {
        if sum < target {
            drawn[i % rest] += 1;
            sum += 1;
        } else if drawn[i % rest] > 1 {
            drawn[i % rest] -= 1;
            sum -= 1;
        }
        i += 1;
    }
    counts.extend(drawn);

    let start = NaiveDate::from_ymd_opt(2012, 4, 3).unwrap();
    let dst_end = NaiveDate::from_ymd_opt(2012, 11, 4).unwrap();
    let mut rows: Vec<(chrono::DateTime<Utc>, String)> = Vec::with_capacity(records);
    for (u, &n) in counts.iter().enumerate() {
        let user_id = (u + 1).to_string();
        let routine_len = rng.gen_range(3..=6);
        let routine: Vec<&str> = CATEGORIES
            .choose_multiple(&mut rng, routine_len)
            .copied()
            .collect();
        let per_day = if u == 0 { 9 } else { rng.gen_range(2..=8) };
        let days = n.div_ceil(per_day).min(330);
        let mut per_day_counts = vec![0usize; days];
        for _ in 0..n {
            per_day_counts[rng.gen_range(0..days)] += 1;
        }
        for (d, &k) in per_day_counts.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let date = start + Duration::days(d as i64);
            let offset = if date < dst_end { -240 } else { -300 };
            let mut minutes: Vec<i64> = (0..k).map(|_| rng.gen_range(7 * 60..23 * 60)).collect();
            minutes.sort_unstable();
            let mut step = rng.gen_range(0..routine.len());
            for m in minutes {
                let category = if rng.gen_bool(0.7) {
                    step = (step + 1) % routine.len();
                    routine[step]
                } else {
                    CATEGORIES[rng.gen_range(0..CATEGORIES.len())]
                };
                let local = date.and_hms_opt(0, 0, 0).unwrap() + Duration::minutes(m) + Duration::seconds(rng.gen_range(0..60));
                let utc = Utc.from_utc_datetime(&(local - Duration::minutes(offset)));
                let venue = format!("4{:07x}{:016x}", rng.gen::<u32>() & 0xfffffff, rng.gen::<u64>());
                let cat_id = format!("4bf58dd8d48988d1{:02x}941735", category.len());
                let lat = 40.55 + rng.gen_range(0.0..0.35f64);
                let lon = -74.25 + rng.gen_range(0.0..0.5f64);
                let line = format!(
                    "{user_id}\t{venue}\t{cat_id}\t{category}\t{lat:.6}\t{lon:.6}\t{offset}\t{}",
                    utc.format("%a %b %d %H:%M:%S +0000 %Y")
                );
                rows.push((utc, line));
            }
        }
    }
    rows.sort_by_key(|(t, _)| *t);

    let bad: Vec<(&str, String)> = vec![
        ("f", "1\tv\tc\tBar\t40.7\t-73.9\t-240".to_string()),
        ("f", "1\tv\tc\tBar\t40.7\t-73.9\t-240\tTue Apr 03 18:00:09 +0000 2012\textra".to_string()),
        ("f", String::new()),
        ("f", "just some text".to_string()),
        ("f", "\tv\tc\tBar\t40.7\t-73.9\t-240\tTue Apr 03 18:00:09 +0000 2012".to_string()),
        ("f", "1\tv\tc\t   \t40.7\t-73.9\t-240\tTue Apr 03 18:00:09 +0000 2012".to_string()),
        ("n", "1\tv\tc\tBar\t91.0\t-73.9\t-240\tTue Apr 03 18:00:09 +0000 2012".to_string()),
        ("n", "1\tv\tc\tBar\t40.7\t-181\t-240\tTue Apr 03 18:00:09 +0000 2012".to_string()),
        ("n", "1\tv\tc\tBar\tabc\t-73.9\t-240\tTue Apr 03 18:00:09 +0000 2012".to_string()),
        ("n", "1\tv\tc\tBar\t40.7\t-73.9\t900\tTue Apr 03 18:00:09 +0000 2012".to_string()),
        ("n", "1\tv\tc\tBar\tNaN\t-73.9\t-240\tTue Apr 03 18:00:09 +0000 2012".to_string()),
        ("n", "1\tv\tc\tBar\t40.7\t-73.9\t-4.5\tTue Apr 03 18:00:09 +0000 2012".to_string()),
        ("t", "1\tv\tc\tBar\t40.7\t-73.9\t-240\tMon Apr 03 18:00:09 +0000 2012".to_string()),
        ("t", "1\tv\tc\tBar\t40.7\t-73.9\t-240\tyesterday".to_string()),
        ("t", "1\tv\tc\tBar\t40.7\t-73.9\t-240\tTue Apr 03 18:00:09 +0000 1912".to_string()),
        ("t", "1\tv\tc\tBar\t40.7\t-73.9\t-240\tTue Apr 31 18:00:09 +0000 2012".to_string()),
    ];
    let mut malformed = Malformed::default();
    let mut lines: Vec<String> = rows.into_iter().map(|(_, l)| l).collect();
    for _ in 0..3 {
        for (class, line) in &bad {
            let at = rng.gen_range(0..=lines.len());
            lines.insert(at, line.clone());
            match *class {
                "f" => malformed.field_count += 1,
                "n" => malformed.numeric += 1,
                _ => malformed.timestamp += 1,
            }
        }
    }

    let mut text = lines.join("\r\n");
    text.push_str("\r\n");
    SyntheticDataset {
        bytes: to_windows_1252(&text),
        valid: records,
        malformed,
        users,
        top_user: "1".to_string(),
        top_user_records,
    }
}

fn to_windows_1252(text: &str) -> Vec<u8> {
    text.chars()
        .map(|c| match c {
            c if c.is_ascii() => c as u8,
            'é' => 0xE9,
            other => panic!("no windows-1252 byte for {other:?}"),
        })
        .collect()
}

pub fn nyc_stand_in() -> SyntheticDataset {
    synthetic_dataset(2012, SYNTHETIC_USERS, SYNTHETIC_RECORDS, SYNTHETIC_TOP_USER_RECORDS)
}
