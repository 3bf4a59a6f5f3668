//! Parsing of check-in histories in the Foursquare NYC/TKY distribution layout.
//!
//! Each line carries eight tab-separated fields:
//!
//! ```text
//! user_id  venue_id  venue_category_id  venue_category_name  latitude  longitude  tz_offset_minutes  utc_time
//! ```
//!
//! `utc_time` uses the dataset's own layout (`Tue Apr 03 18:00:09 +0000 2012`);
//! ISO-8601 is accepted as a second layout for hand-made uploads.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDateTime, SubsecRound, Utc};
use serde::Serialize;

pub const FIELD_COUNT: usize = 8;
pub const MAX_TZ_OFFSET_MINUTES: i32 = 14 * 60;

const DATASET_TIME_LAYOUT: &str = "%a %b %d %H:%M:%S %z %Y";
const RENDER_TIME_LAYOUT: &str = "%a %b %d %H:%M:%S +0000 %Y";
const MIN_YEAR: i32 = 1990;
const MAX_YEAR: i32 = 2100;

/// One raw check-in event.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckinRecord {
    pub user_id: String,
    pub venue_id: String,
    pub venue_category_id: String,
    pub venue_category_name: String,
    pub latitude: f64,
    pub longitude: f64,
    pub tz_offset_minutes: i32,
    pub utc_time: DateTime<Utc>,
}

/// A user's check-ins, ascending by `utc_time` with ties kept in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct UserHistory {
    pub user_id: String,
    pub records: Vec<CheckinRecord>,
}

impl UserHistory {
    pub fn new(user_id: impl Into<String>) -> Self {
        UserHistory {
            user_id: user_id.into(),
            records: Vec::new(),
        }
    }

    /// Appends records and restores time order. Existing records precede new
    /// ones that share a timestamp.
    pub fn merge(&mut self, records: impl IntoIterator<Item = CheckinRecord>) {
        self.records.extend(records);
        self.records.sort_by_key(|r| r.utc_time);
    }

    pub fn first_time(&self) -> Option<DateTime<Utc>> {
        self.records.first().map(|r| r.utc_time)
    }

    pub fn last_time(&self) -> Option<DateTime<Utc>> {
        self.records.last().map(|r| r.utc_time)
    }
}

/// Rejection classes tallied in an [`IngestReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectClass {
    FieldCount,
    Numeric,
    Timestamp,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: expected {FIELD_COUNT} tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: field `{field}` is empty")]
    EmptyField { line: usize, field: &'static str },
    #[error("line {line}: field `{field}` has invalid or out-of-range value {value:?}")]
    NumericRange {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: unparseable timestamp {value:?}")]
    Timestamp { line: usize, value: String },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::FieldCount { line, .. }
            | ParseError::EmptyField { line, .. }
            | ParseError::NumericRange { line, .. }
            | ParseError::Timestamp { line, .. } => *line,
        }
    }

    pub fn class(&self) -> RejectClass {
        match self {
            ParseError::FieldCount { .. } | ParseError::EmptyField { .. } => {
                RejectClass::FieldCount
            }
            ParseError::NumericRange { .. } => RejectClass::Numeric,
            ParseError::Timestamp { .. } => RejectClass::Timestamp,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RejectCounts {
    pub field_count: usize,
    pub numeric: usize,
    pub timestamp: usize,
}

impl RejectCounts {
    pub fn total(&self) -> usize {
        self.field_count + self.numeric + self.timestamp
    }

    fn bump(&mut self, class: RejectClass) {
        match class {
            RejectClass::FieldCount => self.field_count += 1,
            RejectClass::Numeric => self.numeric += 1,
            RejectClass::Timestamp => self.timestamp += 1,
        }
    }
}

/// Line accounting for one ingest. `total_lines == parsed + rejected.total()`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub total_lines: usize,
    pub parsed: usize,
    pub rejected: RejectCounts,
}

impl IngestReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialization is infallible")
    }
}

/// Number of rejected lines whose error is kept verbatim in [`Ingested::errors`].
pub const MAX_KEPT_ERRORS: usize = 100;

/// Result of ingesting one input.
#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub users: BTreeMap<String, UserHistory>,
    pub report: IngestReport,
    /// The first [`MAX_KEPT_ERRORS`] rejections, in line order.
    pub errors: Vec<ParseError>,
}

impl Ingested {
    pub fn record_count(&self) -> usize {
        self.users.values().map(|h| h.records.len()).sum()
    }
}

/// Parses one data line. `line_no` is 1-based and only used for error reporting.
pub fn parse_line(line: &str, line_no: usize) -> Result<CheckinRecord, ParseError> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != FIELD_COUNT {
        return Err(ParseError::FieldCount {
            line: line_no,
            found: fields.len(),
        });
    }

    let non_empty = |value: &str, field: &'static str| {
        if value.trim().is_empty() {
            Err(ParseError::EmptyField {
                line: line_no,
                field,
            })
        } else {
            Ok(value.to_string())
        }
    };
    let user_id = non_empty(fields[0], "user_id")?;
    let venue_id = non_empty(fields[1], "venue_id")?;
    let venue_category_id = fields[2].to_string();
    let venue_category_name = non_empty(fields[3], "venue_category_name")?
        .trim()
        .to_string();

    let latitude = parse_coordinate(fields[4], 90.0, "latitude", line_no)?;
    let longitude = parse_coordinate(fields[5], 180.0, "longitude", line_no)?;
    let tz_offset_minutes = fields[6]
        .trim()
        .parse::<i32>()
        .ok()
        .filter(|m| m.abs() <= MAX_TZ_OFFSET_MINUTES)
        .ok_or_else(|| ParseError::NumericRange {
            line: line_no,
            field: "tz_offset_minutes",
            value: fields[6].to_string(),
        })?;
    let utc_time = parse_timestamp(fields[7]).ok_or_else(|| ParseError::Timestamp {
        line: line_no,
        value: fields[7].to_string(),
    })?;

    Ok(CheckinRecord {
        user_id,
        venue_id,
        venue_category_id,
        venue_category_name,
        latitude,
        longitude,
        tz_offset_minutes,
        utc_time,
    })
}

fn parse_coordinate(
    raw: &str,
    bound: f64,
    field: &'static str,
    line: usize,
) -> Result<f64, ParseError> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && v.abs() <= bound)
        .ok_or_else(|| ParseError::NumericRange {
            line,
            field,
            value: raw.to_string(),
        })
}

/// Accepts the dataset layout, RFC 3339, or a bare `YYYY-MM-DDTHH:MM:SS`
/// (taken as UTC). Sub-second digits are truncated.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    let parsed = DateTime::parse_from_str(raw, DATASET_TIME_LAYOUT)
        .or_else(|_| DateTime::parse_from_rfc3339(raw))
        .map(|t| t.with_timezone(&Utc))
        .ok()
        .or_else(|| {
            ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
                .iter()
                .find_map(|layout| NaiveDateTime::parse_from_str(raw, layout).ok())
                .map(|naive| naive.and_utc())
        })?
        .trunc_subsecs(0);
    (MIN_YEAR..=MAX_YEAR)
        .contains(&parsed.year())
        .then_some(parsed)
}

/// Inverse of [`parse_line`] for valid records.
pub fn render_line(record: &CheckinRecord) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        record.user_id,
        record.venue_id,
        record.venue_category_id,
        record.venue_category_name,
        record.latitude,
        record.longitude,
        record.tz_offset_minutes,
        record.utc_time.format(RENDER_TIME_LAYOUT),
    )
}

/// Decodes raw input bytes. Valid UTF-8 is used as is; anything else is read
/// as windows-1252, the encoding of the public dataset files.
pub fn decode_text(bytes: &[u8]) -> Cow<'_, str> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    match std::str::from_utf8(bytes) {
        Ok(text) => Cow::Borrowed(text),
        Err(_) => encoding_rs::WINDOWS_1252.decode_without_bom_handling(bytes).0,
    }
}

/// Parses already-decoded text. Lines may end in LF or CRLF; a trailing
/// newline does not produce an extra line.
pub fn ingest_text(text: &str) -> Ingested {
    let mut out = Ingested::default();
    let mut grouped: BTreeMap<String, Vec<CheckinRecord>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        out.report.total_lines += 1;
        match parse_line(line, idx + 1) {
            Ok(record) => {
                out.report.parsed += 1;
                grouped
                    .entry(record.user_id.clone())
                    .or_default()
                    .push(record);
            }
            Err(err) => {
                out.report.rejected.bump(err.class());
                if out.errors.len() < MAX_KEPT_ERRORS {
                    out.errors.push(err);
                }
            }
        }
    }
    out.users = grouped
        .into_iter()
        .map(|(user_id, records)| {
            let mut history = UserHistory::new(user_id.clone());
            history.merge(records);
            (user_id, history)
        })
        .collect();
    out
}

pub fn ingest_bytes(bytes: &[u8]) -> Ingested {
    ingest_text(&decode_text(bytes))
}

/// Reads and parses a check-in file. Malformed lines are tallied in the
/// report; only I/O failures are errors.
pub fn ingest_file(path: impl AsRef<Path>) -> io::Result<Ingested> {
    let bytes = fs::read(path)?;
    Ok(ingest_bytes(&bytes))
}
