use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cohort::{normalize_code, Day, EventTimeline};
use crate::error::{Error, Result};

pub const DAYS_PER_MONTH: i64 = 30;

/// Month boundaries of the history intervals, e.g. `[0, 3, 6, 12, 24, 48]`.
///
/// An event `d` days before the anchor falls in interval `[a, b)` iff
/// `30a <= d < 30b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalScheme {
    boundaries: Vec<u32>,
}

impl Default for IntervalScheme {
    fn default() -> Self {
        IntervalScheme {
            boundaries: vec![0, 3, 6, 12, 24, 48],
        }
    }
}

impl IntervalScheme {
    pub fn new(boundaries: Vec<u32>) -> Result<Self> {
        if boundaries.len() < 2 || boundaries[0] != 0 || boundaries.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::config(format!(
                "interval boundaries {boundaries:?} must start at 0 and increase strictly"
            )));
        }
        Ok(IntervalScheme { boundaries })
    }

    pub fn boundaries(&self) -> &[u32] {
        &self.boundaries
    }

    pub fn n_bins(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// Width of bin `k` in months.
    pub fn width(&self, k: usize) -> u32 {
        self.boundaries[k + 1] - self.boundaries[k]
    }

    /// Total history covered, in days.
    pub fn history_days(&self) -> i64 {
        i64::from(*self.boundaries.last().expect("non-empty")) * DAYS_PER_MONTH
    }

    /// Bin for an event `lag_days` before the anchor; `None` for future
    /// events and events older than the history window.
    pub fn bin_of(&self, lag_days: i64) -> Option<usize> {
        if lag_days < 0 || lag_days >= self.history_days() {
            return None;
        }
        let months_floor = self
            .boundaries
            .partition_point(|&b| i64::from(b) * DAYS_PER_MONTH <= lag_days);
        Some(months_floor - 1)
    }

    pub fn label(&self, k: usize) -> String {
        format!("{}-{}m", self.boundaries[k], self.boundaries[k + 1])
    }
}

/// Temporal event types that are binned directly.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    /// Raw diagnosis, keyed by its 3-character code prefix.
    Diagnosis(String),
    PostcodeChange,
    /// An assessment with the given overall rating.
    OverallRating(u8),
}

/// Raw per-interval counts for every event type seen in the history window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinnedEvents {
    pub counts: BTreeMap<EventKind, Vec<u32>>,
    widths: Vec<u32>,
}

impl BinnedEvents {
    /// Counts divided by interval width in months.
    pub fn normalized(&self, kind: &EventKind) -> Vec<f64> {
        match self.counts.get(kind) {
            Some(c) => c
                .iter()
                .zip(&self.widths)
                .map(|(&n, &w)| f64::from(n) / f64::from(w))
                .collect(),
            None => vec![0.0; self.widths.len()],
        }
    }

    pub fn total(&self) -> u32 {
        self.counts.values().flatten().sum()
    }
}

/// First three characters of the normalized code: the raw ICD-10 event type.
pub fn code_prefix3(code: &str) -> String {
    normalize_code(code).chars().take(3).collect()
}

/// Counts history events by type and interval relative to `anchor_day`.
///
/// Diagnoses, postcode changes and assessments (by overall rating) on or
/// before the anchor are included; anything later is ignored.
pub fn bin_events(timeline: &EventTimeline, anchor_day: Day, scheme: &IntervalScheme) -> BinnedEvents {
    let n = scheme.n_bins();
    let mut counts: BTreeMap<EventKind, Vec<u32>> = BTreeMap::new();
    let mut add = |kind: EventKind, day: Day| {
        if let Some(k) = scheme.bin_of(i64::from(anchor_day) - i64::from(day)) {
            counts.entry(kind).or_insert_with(|| vec![0; n])[k] += 1;
        }
    };
    for d in &timeline.diagnoses {
        add(EventKind::Diagnosis(code_prefix3(&d.code)), d.day);
    }
    for &day in &timeline.postcode_changes {
        add(EventKind::PostcodeChange, day);
    }
    for a in &timeline.assessments {
        add(EventKind::OverallRating(a.overall), a.day);
    }
    BinnedEvents {
        counts,
        widths: (0..n).map(|k| scheme.width(k)).collect(),
    }
}

/// Diagnosis codes in each history interval.
pub fn binned_codes<'a>(
    timeline: &'a EventTimeline,
    anchor_day: Day,
    scheme: &IntervalScheme,
) -> Vec<Vec<&'a str>> {
    let mut bins = vec![Vec::new(); scheme.n_bins()];
    for d in &timeline.diagnoses {
        if let Some(k) = scheme.bin_of(i64::from(anchor_day) - i64::from(d.day)) {
            bins[k].push(d.code.as_str());
        }
    }
    bins
}
