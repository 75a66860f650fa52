//! Patient cohort data model, file formats, patient-level splitting and the
//! synthetic cohort generator.
//!
//! Dates are integer day offsets from a cohort epoch; a patient's history
//! may reach back to negative days.

mod io;
mod split;
mod synth;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_cohort, save_cohort, CohortFormat, ARCHIVE_MAGIC};
pub use split::split_patients;
pub use synth::{generate_synthetic_cohort, SyntheticConfig, COPY_CODE_LETTER};

pub type Day = i32;

/// Number of checklist items rated at every risk assessment.
pub const ITEM_COUNT: usize = 18;
/// Highest ordinal value for item and overall ratings (ratings are 0..=MAX_RATING).
pub const MAX_RATING: u8 = 4;
/// Schema version written by this build; newer archives are rejected.
pub const SCHEMA_VERSION: u32 = 1;

/// Closed category vocabularies for every demographic field, in column order.
///
/// Each field carries an `other` bucket that absorbs mass the marginals leave
/// unlisted.
pub const DEMOGRAPHIC_SCHEMA: [(&str, &[&str]); 8] = [
    ("gender", &["male", "female", "other"]),
    ("age_band", &["under_21", "21_to_35", "other"]),
    (
        "marital_status",
        &["married", "divorced_separated", "single", "other"],
    ),
    (
        "occupation",
        &["unemployed_home_duties", "pensioner_retired", "other"],
    ),
    ("language", &["english", "other"]),
    ("country_of_birth", &["australia", "uk", "other"]),
    ("religion", &["christian", "none", "other"]),
    ("indigenous_status", &["no", "yes", "other"]),
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub gender: String,
    pub age_band: String,
    pub marital_status: String,
    pub occupation: String,
    pub language: String,
    pub country_of_birth: String,
    pub religion: String,
    pub indigenous_status: String,
}

impl Demographics {
    /// Field values in [`DEMOGRAPHIC_SCHEMA`] order.
    pub fn values(&self) -> [&str; 8] {
        [
            &self.gender,
            &self.age_band,
            &self.marital_status,
            &self.occupation,
            &self.language,
            &self.country_of_birth,
            &self.religion,
            &self.indigenous_status,
        ]
    }

    /// Builds a record from field values in schema order.
    pub fn from_values(values: [String; 8]) -> Self {
        let [gender, age_band, marital_status, occupation, language, country_of_birth, religion, indigenous_status] =
            values;
        Demographics {
            gender,
            age_band,
            marital_status,
            occupation,
            language,
            country_of_birth,
            religion,
            indigenous_status,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for ((field, vocab), value) in DEMOGRAPHIC_SCHEMA.iter().zip(self.values()) {
            if !vocab.contains(&value) {
                return Err(Error::validation(format!(
                    "demographic field `{field}` has value `{value}`, expected one of {vocab:?}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub day: Day,
    pub code: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentEvent {
    pub day: Day,
    pub items: [u8; ITEM_COUNT],
    pub overall: u8,
}

impl AssessmentEvent {
    pub fn item_sum(&self) -> u32 {
        self.items.iter().map(|&r| r as u32).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTimeline {
    pub diagnoses: Vec<Diagnosis>,
    pub postcode_changes: Vec<Day>,
    pub assessments: Vec<AssessmentEvent>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub demographics: Demographics,
    pub timeline: EventTimeline,
}

impl PatientRecord {
    pub fn validate(&self) -> Result<()> {
        let id = &self.patient_id;
        if id.is_empty() {
            return Err(Error::validation("empty patient_id"));
        }
        self.demographics
            .validate()
            .map_err(|e| Error::validation(format!("patient {id}: {e}")))?;
        let assessments = &self.timeline.assessments;
        for (k, a) in assessments.iter().enumerate() {
            if let Some(bad) = a.items.iter().chain([&a.overall]).find(|&&r| r > MAX_RATING) {
                return Err(Error::validation(format!(
                    "patient {id}: assessment {k} has rating {bad} above {MAX_RATING}"
                )));
            }
        }
        if assessments.windows(2).any(|w| w[1].day < w[0].day) {
            return Err(Error::validation(format!(
                "patient {id}: assessments are not sorted by day"
            )));
        }
        if let Some(d) = self.timeline.diagnoses.iter().find(|d| d.code.trim().is_empty()) {
            return Err(Error::validation(format!(
                "patient {id}: empty diagnosis code on day {}",
                d.day
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortDataset {
    pub schema_version: u32,
    pub patients: Vec<PatientRecord>,
}

/// Summary produced by [`CohortDataset::validate`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub patients: usize,
    pub assessments: usize,
    pub diagnoses: usize,
    pub postcode_changes: usize,
    /// Diagnosis codes that do not look like ICD-10 (kept, but flagged).
    pub flagged_codes: Vec<String>,
}

impl CohortDataset {
    pub fn new(patients: Vec<PatientRecord>) -> Self {
        CohortDataset {
            schema_version: SCHEMA_VERSION,
            patients,
        }
    }

    pub fn n_assessments(&self) -> usize {
        self.patients
            .iter()
            .map(|p| p.timeline.assessments.len())
            .sum()
    }

    /// Checks every record invariant; unknown diagnosis codes are reported, not rejected.
    pub fn validate(&self) -> Result<ValidationReport> {
        let mut seen = HashSet::with_capacity(self.patients.len());
        let mut report = ValidationReport {
            patients: self.patients.len(),
            ..Default::default()
        };
        let mut flagged = std::collections::BTreeSet::new();
        for p in &self.patients {
            if !seen.insert(p.patient_id.as_str()) {
                return Err(Error::validation(format!(
                    "duplicate patient_id `{}`",
                    p.patient_id
                )));
            }
            p.validate()?;
            report.assessments += p.timeline.assessments.len();
            report.diagnoses += p.timeline.diagnoses.len();
            report.postcode_changes += p.timeline.postcode_changes.len();
            for d in &p.timeline.diagnoses {
                if !is_well_formed_icd10(&d.code) {
                    flagged.insert(d.code.clone());
                }
            }
        }
        report.flagged_codes = flagged.into_iter().collect();
        Ok(report)
    }
}

/// Uppercases a code and strips the subcode separator: `s51.0` becomes `S510`.
pub fn normalize_code(code: &str) -> String {
    code.trim()
        .chars()
        .filter(|c| *c != '.')
        .map(|c| c.to_ascii_uppercase())
        .collect()
}

/// Letter, two digits, then an optional subcode (`F32`, `F32.1`, `S51.01`, `F329`).
pub fn is_well_formed_icd10(code: &str) -> bool {
    let b = code.trim().as_bytes();
    if b.len() < 3 || !b[0].is_ascii_alphabetic() || !b[1].is_ascii_digit() || !b[2].is_ascii_digit()
    {
        return false;
    }
    let rest = match &b[3..] {
        [] => return true,
        [b'.', rest @ ..] => rest,
        rest => rest,
    };
    !rest.is_empty() && rest.len() <= 4 && rest.iter().all(|c| c.is_ascii_alphanumeric())
}
