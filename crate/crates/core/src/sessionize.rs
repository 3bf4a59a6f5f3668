//! Splitting a user's labeled visits into per-day sequences.
//!
//! A session is one local calendar day, where local time is `utc_time` shifted
//! by the visit's own timezone offset.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::Serialize;

use crate::taxonomy::LabeledVisit;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VisitSequence {
    pub user_id: String,
    pub session_key: NaiveDate,
    pub items: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionOptions {
    pub collapse_adjacent_duplicates: bool,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            collapse_adjacent_duplicates: true,
        }
    }
}

impl SessionOptions {
    pub fn uncollapsed() -> Self {
        SessionOptions {
            collapse_adjacent_duplicates: false,
        }
    }
}

pub fn local_date(utc_time: DateTime<Utc>, tz_offset_minutes: i32) -> NaiveDate {
    (utc_time + Duration::minutes(i64::from(tz_offset_minutes))).date_naive()
}

/// Groups visits of one user by local day. Within a day, items keep input
/// order; days are returned in ascending order.
pub fn sessionize(visits: &[LabeledVisit], options: SessionOptions) -> Vec<VisitSequence> {
    let user_id = visits.first().map(|v| v.user_id.clone()).unwrap_or_default();
    let mut days: BTreeMap<NaiveDate, Vec<&LabeledVisit>> = BTreeMap::new();
    for visit in visits {
        days.entry(local_date(visit.utc_time, visit.tz_offset_minutes))
            .or_default()
            .push(visit);
    }
    days.into_iter()
        .map(|(session_key, day)| {
            let mut items: Vec<String> = Vec::with_capacity(day.len());
            for visit in day {
                if options.collapse_adjacent_duplicates && items.last() == Some(&visit.label) {
                    continue;
                }
                items.push(visit.label.clone());
            }
            VisitSequence {
                user_id: user_id.clone(),
                session_key,
                items,
            }
        })
        .collect()
}
