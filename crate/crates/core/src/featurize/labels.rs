use serde::{Deserialize, Serialize};

use crate::cohort::{normalize_code, CohortDataset, Day};
use crate::error::{Error, Result};

/// Outcome horizons, in days, used throughout the experiment protocol.
pub const DEFAULT_HORIZONS: [u32; 6] = [15, 30, 60, 90, 180, 360];

const STUB_RISKY: &str = include_str!("../../data/risky_codes.txt");

/// Set of ICD-10 prefixes whose occurrence marks a risk event.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskyCodeTable {
    prefixes: Vec<String>,
}

impl RiskyCodeTable {
    pub fn new<S: AsRef<str>>(prefixes: &[S]) -> Result<Self> {
        let mut out: Vec<String> = Vec::with_capacity(prefixes.len());
        for p in prefixes {
            let norm = normalize_code(p.as_ref());
            if norm.is_empty() {
                return Err(Error::validation("empty risky-code prefix"));
            }
            out.push(norm);
        }
        out.sort();
        out.dedup();
        Ok(RiskyCodeTable { prefixes: out })
    }

    /// Parses one prefix per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .collect();
        Self::new(&lines)
    }

    /// The shipped stub table (`S11`, `S51`, intentional self-harm and
    /// psychotropic poisoning prefixes).
    pub fn stub() -> Self {
        Self::parse(STUB_RISKY).expect("stub risky table parses")
    }

    pub fn prefixes(&self) -> &[String] {
        &self.prefixes
    }

    pub fn is_risky(&self, code: &str) -> bool {
        let c = normalize_code(code);
        self.prefixes.iter().any(|p| c.starts_with(p.as_str()))
    }
}

/// Identifies one assessment anchor (one feature row).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorKey {
    pub patient_index: usize,
    pub patient_id: String,
    pub assessment_index: usize,
    pub day: Day,
}

/// Per-anchor binary outcomes (+1 / -1) for every horizon.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskLabelSet {
    pub horizons: Vec<u32>,
    pub anchors: Vec<AnchorKey>,
    labels: Vec<i8>,
}

impl RiskLabelSet {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn get(&self, row: usize, horizon_index: usize) -> i8 {
        self.labels[row * self.horizons.len() + horizon_index]
    }

    /// Labels of one anchor across all horizons.
    pub fn row(&self, row: usize) -> &[i8] {
        let h = self.horizons.len();
        &self.labels[row * h..(row + 1) * h]
    }

    pub fn column(&self, horizon_index: usize) -> Vec<i8> {
        (0..self.len()).map(|r| self.get(r, horizon_index)).collect()
    }

    pub fn horizon_index(&self, horizon: u32) -> Option<usize> {
        self.horizons.iter().position(|&h| h == horizon)
    }

    /// Fraction of anchors labelled +1 at the given horizon.
    pub fn prevalence(&self, horizon_index: usize) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let pos = (0..self.len())
            .filter(|&r| self.get(r, horizon_index) == 1)
            .count();
        pos as f64 / self.len() as f64
    }

    /// Keeps the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> RiskLabelSet {
        let mut labels = Vec::with_capacity(rows.len() * self.horizons.len());
        for &r in rows {
            labels.extend_from_slice(self.row(r));
        }
        RiskLabelSet {
            horizons: self.horizons.clone(),
            anchors: rows.iter().map(|&r| self.anchors[r].clone()).collect(),
            labels,
        }
    }
}

/// Every assessment of every patient, in cohort order.
pub fn assessment_anchors(dataset: &CohortDataset) -> Vec<AnchorKey> {
    let mut out = Vec::with_capacity(dataset.n_assessments());
    for (pi, p) in dataset.patients.iter().enumerate() {
        for (ai, a) in p.timeline.assessments.iter().enumerate() {
            out.push(AnchorKey {
                patient_index: pi,
                patient_id: p.patient_id.clone(),
                assessment_index: ai,
                day: a.day,
            });
        }
    }
    out
}

/// Labels every assessment anchor: +1 at horizon h iff a risky diagnosis
/// falls in `(anchor_day, anchor_day + h]`. Events on the anchor day itself
/// belong to the history, never to the outcome.
pub fn label_outcomes(
    dataset: &CohortDataset,
    risky: &RiskyCodeTable,
    horizons: &[u32],
) -> Result<RiskLabelSet> {
    if horizons.is_empty() || horizons[0] == 0 || horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(format!(
            "horizons {horizons:?} must be positive and strictly ascending"
        )));
    }
    let mut anchors = Vec::with_capacity(dataset.n_assessments());
    let mut labels = Vec::with_capacity(dataset.n_assessments() * horizons.len());
    for (pi, p) in dataset.patients.iter().enumerate() {
        let mut risky_days: Vec<Day> = p
            .timeline
            .diagnoses
            .iter()
            .filter(|d| risky.is_risky(&d.code))
            .map(|d| d.day)
            .collect();
        risky_days.sort_unstable();
        for (ai, a) in p.timeline.assessments.iter().enumerate() {
            let first_after = risky_days
                .get(risky_days.partition_point(|&d| d <= a.day))
                .copied();
            for &h in horizons {
                let hit = first_after.is_some_and(|d| i64::from(d) <= i64::from(a.day) + i64::from(h));
                labels.push(if hit { 1 } else { -1 });
            }
            anchors.push(AnchorKey {
                patient_index: pi,
                patient_id: p.patient_id.clone(),
                assessment_index: ai,
                day: a.day,
            });
        }
    }
    Ok(RiskLabelSet {
        horizons: horizons.to_vec(),
        anchors,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{
        AssessmentEvent, Demographics, Diagnosis, EventTimeline, PatientRecord, ITEM_COUNT,
    };

    fn cohort(diags: &[(Day, &str)]) -> CohortDataset {
        CohortDataset::new(vec![PatientRecord {
            patient_id: "p".into(),
            demographics: Demographics::from_values(
                ["male", "under_21", "single", "other", "english", "australia", "none", "no"]
                    .map(String::from),
            ),
            timeline: EventTimeline {
                diagnoses: diags
                    .iter()
                    .map(|&(day, code)| Diagnosis {
                        day,
                        code: code.into(),
                    })
                    .collect(),
                postcode_changes: vec![],
                assessments: vec![AssessmentEvent {
                    day: 100,
                    items: [0; ITEM_COUNT],
                    overall: 0,
                }],
            },
        }])
    }

    fn labels(diags: &[(Day, &str)]) -> Vec<i8> {
        label_outcomes(&cohort(diags), &RiskyCodeTable::stub(), &DEFAULT_HORIZONS)
            .unwrap()
            .row(0)
            .to_vec()
    }

    #[test]
    fn window_membership() {
        assert_eq!(labels(&[(120, "S51.0")]), vec![-1, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn no_risky_events() {
        assert_eq!(labels(&[(120, "F32.1")]), vec![-1; 6]);
        assert_eq!(labels(&[]), vec![-1; 6]);
    }

    #[test]
    fn right_closed_and_anchor_day_excluded() {
        assert_eq!(labels(&[(130, "S11")]), vec![-1, 1, 1, 1, 1, 1]);
        assert_eq!(labels(&[(100, "S11")]), vec![-1; 6]);
        assert_eq!(labels(&[(101, "s11.2")]), vec![1; 6]);
        assert_eq!(labels(&[(460, "X61")]), vec![-1, -1, -1, -1, -1, 1]);
        assert_eq!(labels(&[(461, "X61")]), vec![-1; 6]);
    }

    #[test]
    fn horizons_must_ascend() {
        let ds = cohort(&[]);
        let r = RiskyCodeTable::stub();
        assert!(label_outcomes(&ds, &r, &[30, 15]).is_err());
        assert!(label_outcomes(&ds, &r, &[0, 15]).is_err());
        assert!(label_outcomes(&ds, &r, &[]).is_err());
    }

    #[test]
    fn stub_table_contents() {
        let r = RiskyCodeTable::stub();
        assert!(r.is_risky("S51.9"));
        assert!(r.is_risky("X64"));
        assert!(!r.is_risky("S52"));
        assert!(!r.is_risky("X85"));
    }
}
