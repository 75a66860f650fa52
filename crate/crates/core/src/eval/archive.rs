use std::fmt::Write as _;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cohort::CohortDataset;
use crate::ensemble::{predict_forest, predict_gbm, Forest, GbmModel};
use crate::error::{Error, Result};
use crate::featurize::{assessment_anchors, AnchorKey, FeatureSet, Featurizer, RiskyCodeTable};
use crate::linear::{predict_logistic, LassoModel};
use crate::neuralnet::DnndModel;
use crate::trees::CartModel;

pub const ARCHIVE_FORMAT: &str = "redrisk-models";
pub const ARCHIVE_VERSION: u32 = 1;

/// A fitted featurizer and the columns that survived rare-feature filtering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchivedFeatureSet {
    pub featurizer: Featurizer,
    pub columns: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ArchivedModel {
    #[serde(rename = "cart.v1")]
    Cart {
        feature_set: FeatureSet,
        horizon_days: u32,
        model: CartModel,
    },
    #[serde(rename = "lasso.v1")]
    Lasso {
        feature_set: FeatureSet,
        horizon_days: u32,
        model: LassoModel,
    },
    #[serde(rename = "forest.v1")]
    Forest {
        feature_set: FeatureSet,
        horizon_days: u32,
        model: Forest,
    },
    #[serde(rename = "gbm.v1")]
    Gbm {
        feature_set: FeatureSet,
        horizon_days: u32,
        model: GbmModel,
    },
    #[serde(rename = "dnnd.v1")]
    Dnnd {
        feature_set: FeatureSet,
        horizons: Vec<u32>,
        model: DnndModel,
    },
}

impl ArchivedModel {
    pub fn model_name(&self) -> &'static str {
        match self {
            ArchivedModel::Cart { .. } => "cart",
            ArchivedModel::Lasso { .. } => "lasso",
            ArchivedModel::Forest { .. } => "rf",
            ArchivedModel::Gbm { .. } => "gbm",
            ArchivedModel::Dnnd { .. } => "dnnd",
        }
    }

    pub fn feature_set(&self) -> FeatureSet {
        match self {
            ArchivedModel::Cart { feature_set, .. }
            | ArchivedModel::Lasso { feature_set, .. }
            | ArchivedModel::Forest { feature_set, .. }
            | ArchivedModel::Gbm { feature_set, .. }
            | ArchivedModel::Dnnd { feature_set, .. } => *feature_set,
        }
    }

    /// `(horizon, score, label)` for each horizon this entry predicts.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<(u32, f64, i8)>> {
        Ok(match self {
            ArchivedModel::Cart { horizon_days, model, .. } => {
                let (s, l) = model.predict(x)?;
                vec![(*horizon_days, s, l)]
            }
            ArchivedModel::Lasso { horizon_days, model, .. } => {
                let (s, l) = predict_logistic(model, x)?;
                vec![(*horizon_days, s, l)]
            }
            ArchivedModel::Forest { horizon_days, model, .. } => {
                let (s, l) = predict_forest(model, x)?;
                vec![(*horizon_days, s, l)]
            }
            ArchivedModel::Gbm { horizon_days, model, .. } => {
                let (s, l) = predict_gbm(model, x)?;
                vec![(*horizon_days, s, l)]
            }
            ArchivedModel::Dnnd { horizons, model, .. } => horizons
                .iter()
                .zip(model.predict(x)?)
                .map(|(&h, p)| (h, p.probability, p.label))
                .collect(),
        })
    }
}

/// Everything needed to score a new cohort: featurizers, retained columns
/// and every fitted model, in one JSON container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub horizons: Vec<u32>,
    pub risky: RiskyCodeTable,
    pub feature_sets: Vec<ArchivedFeatureSet>,
    pub models: Vec<ArchivedModel>,
}

impl ModelArchive {
    pub fn new(seed: u64, horizons: Vec<u32>, risky: RiskyCodeTable) -> Self {
        ModelArchive {
            format: ARCHIVE_FORMAT.to_string(),
            version: ARCHIVE_VERSION,
            seed,
            horizons,
            risky,
            feature_sets: Vec::new(),
            models: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::data(format!("cannot encode model archive: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let a: ModelArchive = serde_json::from_str(text)
            .map_err(|e| Error::parse(e.line(), format!("model archive: {e}")))?;
        if a.format != ARCHIVE_FORMAT {
            return Err(Error::validation(format!(
                "not a model archive (format `{}`)",
                a.format
            )));
        }
        if a.version != ARCHIVE_VERSION {
            return Err(Error::validation(format!(
                "model archive version {} is not supported (expected {ARCHIVE_VERSION})",
                a.version
            )));
        }
        for m in &a.models {
            if a.feature_set(m.feature_set()).is_none() {
                return Err(Error::validation(format!(
                    "{} entry refers to feature set {} with no featurizer",
                    m.model_name(),
                    m.feature_set()
                )));
            }
        }
        Ok(a)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(f), self)
            .map_err(|e| Error::data(format!("cannot write {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn feature_set(&self, fs: FeatureSet) -> Option<&ArchivedFeatureSet> {
        self.feature_sets.iter().find(|f| f.featurizer.feature_set == fs)
    }

    /// Scores every assessment anchor of `dataset` with every archived model.
    pub fn score(&self, dataset: &CohortDataset) -> Result<Vec<ScoreRow>> {
        let anchors = assessment_anchors(dataset);
        let mut out = Vec::new();
        for fs_entry in &self.feature_sets {
            let fs = fs_entry.featurizer.feature_set;
            let x = fs_entry
                .featurizer
                .transform(dataset, &anchors)?
                .align_to(&fs_entry.columns)?;
            for m in self.models.iter().filter(|m| m.feature_set() == fs) {
                for (i, a) in anchors.iter().enumerate() {
                    for (h, score, label) in m.predict(x.values.row(i))? {
                        out.push(ScoreRow {
                            anchor: a.clone(),
                            model: m.model_name(),
                            feature_set: fs,
                            horizon_days: h,
                            score,
                            label,
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub anchor: AnchorKey,
    pub model: &'static str,
    pub feature_set: FeatureSet,
    pub horizon_days: u32,
    pub score: f64,
    pub label: i8,
}

pub const SCORES_HEADER: &str = "patient_id,assessment_index,day,model,feature_set,horizon_days,score,label";

pub fn scores_to_csv(rows: &[ScoreRow]) -> String {
    let mut s = String::from(SCORES_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.anchor.patient_id,
            r.anchor.assessment_index,
            r.anchor.day,
            r.model,
            r.feature_set,
            r.horizon_days,
            r.score,
            r.label
        );
    }
    s
}
