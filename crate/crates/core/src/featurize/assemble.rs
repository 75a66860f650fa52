use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::binning::{binned_codes, code_prefix3, IntervalScheme};
use super::labels::{AnchorKey, RiskLabelSet};
use super::mapping::{MappingTable, MappingTables};
use super::stats::{aggregate_assessments, AssessmentStats};
use crate::cohort::{CohortDataset, PatientRecord, DEMOGRAPHIC_SCHEMA, MAX_RATING};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSet {
    FS1,
    FS2,
    FS3,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [FeatureSet::FS1, FeatureSet::FS2, FeatureSet::FS3];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::FS1 => "FS1",
            FeatureSet::FS2 => "FS2",
            FeatureSet::FS3 => "FS3",
        }
    }

    pub fn groups(self) -> &'static [ColumnGroup] {
        use ColumnGroup::*;
        match self {
            FeatureSet::FS1 => &[Demographics, Icd10, Elixhauser, Mhdg, LifeEvent],
            FeatureSet::FS2 => &[Demographics, Icd10, Elixhauser, Mhdg, LifeEvent, Assessment],
            FeatureSet::FS3 => &[Mhdg, Assessment],
        }
    }

    pub fn uses_assessments(self) -> bool {
        self.groups().contains(&ColumnGroup::Assessment)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FS1" => Ok(FeatureSet::FS1),
            "FS2" => Ok(FeatureSet::FS2),
            "FS3" => Ok(FeatureSet::FS3),
            _ => Err(Error::config(format!(
                "unknown feature set `{s}` (expected FS1, FS2 or FS3)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnGroup {
    Demographics,
    Icd10,
    Elixhauser,
    Mhdg,
    LifeEvent,
    Assessment,
}

impl ColumnGroup {
    pub fn prefix(self) -> &'static str {
        match self {
            ColumnGroup::Demographics => "demo",
            ColumnGroup::Icd10 => "icd",
            ColumnGroup::Elixhauser => "elix",
            ColumnGroup::Mhdg => "mhdg",
            ColumnGroup::LifeEvent => "life",
            ColumnGroup::Assessment => "assess",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ColumnGroup::Demographics => "demographics",
            ColumnGroup::Icd10 => "icd10",
            ColumnGroup::Elixhauser => "elixhauser",
            ColumnGroup::Mhdg => "mhdg",
            ColumnGroup::LifeEvent => "life_event",
            ColumnGroup::Assessment => "assessment",
        }
    }

    /// Recovers the group from a column name such as `mhdg:depressive@0-3m`.
    pub fn of_column(name: &str) -> Option<ColumnGroup> {
        let prefix = name.split(':').next()?;
        [
            ColumnGroup::Demographics,
            ColumnGroup::Icd10,
            ColumnGroup::Elixhauser,
            ColumnGroup::Mhdg,
            ColumnGroup::LifeEvent,
            ColumnGroup::Assessment,
        ]
        .into_iter()
        .find(|g| g.prefix() == prefix)
    }
}

/// Feature rows aligned with assessment anchors.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub feature_set: FeatureSet,
    pub columns: Vec<String>,
    pub groups: Vec<ColumnGroup>,
    pub values: Matrix,
    pub anchors: Vec<AnchorKey>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.n_cols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            feature_set: self.feature_set,
            columns: self.columns.clone(),
            groups: self.groups.clone(),
            values: self.values.select_rows(rows),
            anchors: rows.iter().map(|&r| self.anchors[r].clone()).collect(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            feature_set: self.feature_set,
            columns: cols.iter().map(|&c| self.columns[c].clone()).collect(),
            groups: cols.iter().map(|&c| self.groups[c]).collect(),
            values: self.values.select_columns(cols),
            anchors: self.anchors.clone(),
        }
    }

    /// Reorders columns to `names`; names this matrix lacks become all-zero
    /// columns, which is what an event never observed would encode to.
    pub fn align_to(&self, names: &[String]) -> Result<FeatureMatrix> {
        let index: HashMap<&str, usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let mut groups = Vec::with_capacity(names.len());
        let mut source = Vec::with_capacity(names.len());
        for n in names {
            let g = ColumnGroup::of_column(n)
                .ok_or_else(|| Error::data(format!("column `{n}` has no known group prefix")))?;
            groups.push(g);
            source.push(index.get(n.as_str()).copied());
        }
        let mut values = Matrix::zeros(self.n_rows(), names.len());
        for i in 0..self.n_rows() {
            let src = self.values.row(i);
            let dst = values.row_mut(i);
            for (d, s) in dst.iter_mut().zip(&source) {
                if let Some(j) = s {
                    *d = src[*j];
                }
            }
        }
        Ok(FeatureMatrix {
            feature_set: self.feature_set,
            columns: names.to_vec(),
            groups,
            values,
            anchors: self.anchors.clone(),
        })
    }
}

/// Column layout fitted on a cohort: the set of raw ICD-10 prefixes seen and
/// the fixed demographic, group and assessment columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub feature_set: FeatureSet,
    pub scheme: IntervalScheme,
    pub tables: MappingTables,
    pub icd_vocabulary: Vec<String>,
}

impl Featurizer {
    /// Collects the raw ICD-10 vocabulary (3-character prefixes) from `dataset`.
    pub fn fit(
        dataset: &CohortDataset,
        feature_set: FeatureSet,
        tables: MappingTables,
        scheme: IntervalScheme,
    ) -> Self {
        let vocab: BTreeSet<String> = if feature_set.groups().contains(&ColumnGroup::Icd10) {
            dataset
                .patients
                .iter()
                .flat_map(|p| p.timeline.diagnoses.iter().map(|d| code_prefix3(&d.code)))
                .filter(|c| !c.is_empty())
                .collect()
        } else {
            BTreeSet::new()
        };
        Featurizer {
            feature_set,
            scheme,
            tables,
            icd_vocabulary: vocab.into_iter().collect(),
        }
    }

    pub fn columns(&self) -> Vec<(String, ColumnGroup)> {
        let s = &self.scheme;
        let bins: Vec<String> = (0..s.n_bins()).map(|k| s.label(k)).collect();
        let mut out = Vec::new();
        for &g in self.feature_set.groups() {
            let p = g.prefix();
            match g {
                ColumnGroup::Demographics => {
                    for (field, cats) in DEMOGRAPHIC_SCHEMA {
                        for c in cats {
                            out.push((format!("{p}:{field}={c}"), g));
                        }
                    }
                }
                ColumnGroup::Icd10 => push_binned(&mut out, g, &self.icd_vocabulary, &bins),
                ColumnGroup::Elixhauser => {
                    push_binned(&mut out, g, self.tables.elixhauser.groups(), &bins)
                }
                ColumnGroup::Mhdg => push_binned(&mut out, g, self.tables.mhdg.groups(), &bins),
                ColumnGroup::LifeEvent => push_binned(&mut out, g, &["postcode".to_string()], &bins),
                ColumnGroup::Assessment => {
                    let ratings: Vec<String> =
                        (0..=MAX_RATING).map(|r| format!("overall={r}")).collect();
                    push_binned(&mut out, g, &ratings, &bins);
                    for n in AssessmentStats::NAMES {
                        out.push((format!("{p}:{n}"), g));
                    }
                }
            }
        }
        out
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns().into_iter().map(|(n, _)| n).collect()
    }

    /// Builds one row per anchor; diagnoses outside the fitted vocabulary are
    /// ignored in the raw ICD-10 block.
    pub fn transform(&self, dataset: &CohortDataset, anchors: &[AnchorKey]) -> Result<FeatureMatrix> {
        let cols = self.columns();
        let p = cols.len();
        let vocab: HashMap<&str, usize> = self
            .icd_vocabulary
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let mut values = Matrix::zeros(anchors.len(), p);
        for (row, anchor) in anchors.iter().enumerate() {
            let patient = dataset.patients.get(anchor.patient_index).ok_or_else(|| {
                Error::data(format!(
                    "anchor refers to patient index {} but the cohort has {} patients",
                    anchor.patient_index,
                    dataset.patients.len()
                ))
            })?;
            if patient.patient_id != anchor.patient_id {
                return Err(Error::data(format!(
                    "labels are not aligned with the cohort: expected patient `{}`, found `{}`",
                    anchor.patient_id, patient.patient_id
                )));
            }
            self.fill_row(patient, anchor, &vocab, values.row_mut(row))?;
        }
        let (columns, groups) = cols.into_iter().unzip();
        Ok(FeatureMatrix {
            feature_set: self.feature_set,
            columns,
            groups,
            values,
            anchors: anchors.to_vec(),
        })
    }

    fn fill_row(
        &self,
        patient: &PatientRecord,
        anchor: &AnchorKey,
        vocab: &HashMap<&str, usize>,
        out: &mut [f64],
    ) -> Result<()> {
        let s = &self.scheme;
        let nb = s.n_bins();
        let width: Vec<f64> = (0..nb).map(|k| f64::from(s.width(k))).collect();
        let tl = &patient.timeline;
        let lag = |day: i32| i64::from(anchor.day) - i64::from(day);
        let mut off = 0;
        for &g in self.feature_set.groups() {
            match g {
                ColumnGroup::Demographics => {
                    for ((_, cats), v) in DEMOGRAPHIC_SCHEMA.iter().zip(patient.demographics.values()) {
                        if let Some(c) = cats.iter().position(|c| *c == v) {
                            out[off + c] = 1.0;
                        }
                        off += cats.len();
                    }
                }
                ColumnGroup::Icd10 => {
                    for d in &tl.diagnoses {
                        if let (Some(k), Some(&i)) =
                            (s.bin_of(lag(d.day)), vocab.get(code_prefix3(&d.code).as_str()))
                        {
                            out[off + i * nb + k] += 1.0 / width[k];
                        }
                    }
                    off += self.icd_vocabulary.len() * nb;
                }
                ColumnGroup::Elixhauser => {
                    off = fill_mapped(&self.tables.elixhauser, tl, anchor.day, s, &width, out, off)
                }
                ColumnGroup::Mhdg => {
                    off = fill_mapped(&self.tables.mhdg, tl, anchor.day, s, &width, out, off)
                }
                ColumnGroup::LifeEvent => {
                    for &day in &tl.postcode_changes {
                        if let Some(k) = s.bin_of(lag(day)) {
                            out[off + k] += 1.0 / width[k];
                        }
                    }
                    off += nb;
                }
                ColumnGroup::Assessment => {
                    let mut history = Vec::new();
                    for a in &tl.assessments {
                        if let Some(k) = s.bin_of(lag(a.day)) {
                            out[off + usize::from(a.overall) * nb + k] += 1.0 / width[k];
                            history.push(a);
                        }
                    }
                    off += (usize::from(MAX_RATING) + 1) * nb;
                    let stats = aggregate_assessments(&history).map_err(|e| {
                        Error::data(format!(
                            "patient {} assessment {}: {e}",
                            anchor.patient_id, anchor.assessment_index
                        ))
                    })?;
                    out[off..off + 5].copy_from_slice(&stats.to_array());
                    off += 5;
                }
            }
        }
        debug_assert_eq!(off, out.len());
        Ok(())
    }
}

fn push_binned(out: &mut Vec<(String, ColumnGroup)>, g: ColumnGroup, keys: &[String], bins: &[String]) {
    for key in keys {
        for b in bins {
            out.push((format!("{}:{key}@{b}", g.prefix()), g));
        }
    }
}

fn fill_mapped(
    table: &MappingTable,
    tl: &crate::cohort::EventTimeline,
    anchor_day: i32,
    s: &IntervalScheme,
    width: &[f64],
    out: &mut [f64],
    off: usize,
) -> usize {
    let nb = s.n_bins();
    for (k, codes) in binned_codes(tl, anchor_day, s).iter().enumerate() {
        for c in codes {
            out[off + table.group_index(c) * nb + k] += 1.0 / width[k];
        }
    }
    off + table.groups().len() * nb
}

/// Fits a [`Featurizer`] on `dataset` with the default interval scheme and
/// builds the matrix for every anchor in `labels`.
pub fn build_feature_matrix(
    dataset: &CohortDataset,
    labels: &RiskLabelSet,
    feature_set: FeatureSet,
    tables: &MappingTables,
) -> Result<FeatureMatrix> {
    Featurizer::fit(dataset, feature_set, tables.clone(), IntervalScheme::default())
        .transform(dataset, &labels.anchors)
}
