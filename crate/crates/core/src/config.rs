//! Experiment configuration: a TOML file with one section per module.
//!
//! Every key is optional; an empty file yields the default protocol. Unknown
//! keys and duplicate keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cohort::SyntheticConfig;
use crate::ensemble::{ForestParams, GbmParams};
use crate::error::{Error, Result};
use crate::featurize::{FeatureSet, DEFAULT_HORIZONS, DEFAULT_RARE_THRESHOLD};
use crate::neuralnet::TrainSchedule;
use crate::trees::LeafSize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelKind {
    Cart,
    Lasso,
    Rf,
    Gbm,
    Dnnd,
    /// The overall assessment rating at the anchor, used as a raw score.
    Clinician,
}

impl ModelKind {
    pub const DEFAULT: [ModelKind; 5] = [
        ModelKind::Cart,
        ModelKind::Lasso,
        ModelKind::Rf,
        ModelKind::Gbm,
        ModelKind::Dnnd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cart => "cart",
            ModelKind::Lasso => "lasso",
            ModelKind::Rf => "rf",
            ModelKind::Gbm => "gbm",
            ModelKind::Dnnd => "dnnd",
            ModelKind::Clinician => "clinician",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cart" => Ok(ModelKind::Cart),
            "lasso" => Ok(ModelKind::Lasso),
            "rf" => Ok(ModelKind::Rf),
            "gbm" => Ok(ModelKind::Gbm),
            "dnnd" => Ok(ModelKind::Dnnd),
            "clinician" => Ok(ModelKind::Clinician),
            _ => Err(Error::config(format!(
                "unknown model `{s}` (expected cart, lasso, rf, gbm, dnnd or clinician)"
            ))),
        }
    }
}

impl TryFrom<String> for ModelKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelKind> for String {
    fn from(m: ModelKind) -> String {
        m.name().to_string()
    }
}

/// Comma-separated list parsing for CLI overrides (`rf,gbm`).
pub fn parse_list<T: FromStr<Err = Error>>(s: &str) -> Result<Vec<T>> {
    let out: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::config(format!("empty list `{s}`")));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub seed: u64,
    /// Independent train/validation splits; seeds are `seed`, `seed + 1`, ...
    pub repeats: usize,
    #[serde(with = "feature_set_names")]
    pub feature_sets: Vec<FeatureSet>,
    pub horizons: Vec<u32>,
    pub models: Vec<ModelKind>,
    pub train_fraction: f64,
    pub rare_threshold: f64,
}

mod feature_set_names {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[FeatureSet], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|f| f.name()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<FeatureSet>, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        names
            .iter()
            .map(|n| n.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            seed: 0,
            repeats: 1,
            feature_sets: FeatureSet::ALL.to_vec(),
            horizons: DEFAULT_HORIZONS.to_vec(),
            models: ModelKind::DEFAULT.to_vec(),
            train_fraction: 0.5,
            rare_threshold: DEFAULT_RARE_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSection {
    /// Cohort file; when absent a synthetic cohort is generated.
    pub path: Option<PathBuf>,
    /// `event-lines` or `cohort-archive`; detected from the file when absent.
    pub format: Option<String>,
    pub synthetic: SyntheticConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TablesSection {
    /// Risky-code prefixes, one per line; the shipped stub when absent.
    pub risky: Option<PathBuf>,
    /// `PREFIX<TAB>GROUP` tables; the shipped stubs when absent.
    pub elixhauser: Option<PathBuf>,
    pub mhdg: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartSection {
    pub leaf_size: LeafSize,
}

impl Default for CartSection {
    fn default() -> Self {
        CartSection {
            leaf_size: LeafSize::DEFAULT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoSection {
    pub grid_size: usize,
    /// The grid spans `[alpha_max / grid_ratio, alpha_max]`.
    pub grid_ratio: f64,
    /// Explicit penalties; overrides the log-spaced grid.
    pub grid: Option<Vec<f64>>,
}

impl Default for LassoSection {
    fn default() -> Self {
        LassoSection {
            grid_size: 20,
            grid_ratio: 1000.0,
            grid: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub experiment: ExperimentSection,
    pub cohort: CohortSection,
    pub tables: TablesSection,
    pub cart: CartSection,
    pub lasso: LassoSection,
    pub rf: ForestParams,
    pub gbm: GbmParams,
    pub dnnd: TrainSchedule,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.feature_sets.is_empty() {
            return Err(Error::config("experiment.feature_sets must not be empty"));
        }
        if e.models.is_empty() {
            return Err(Error::config("experiment.models must not be empty"));
        }
        if e.repeats == 0 {
            return Err(Error::config("experiment.repeats must be at least 1"));
        }
        if e.horizons.is_empty() || e.horizons[0] == 0 || e.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config(format!(
                "experiment.horizons = {:?} must be positive and strictly ascending",
                e.horizons
            )));
        }
        if !(e.train_fraction > 0.0 && e.train_fraction < 1.0) {
            return Err(Error::config(format!(
                "experiment.train_fraction = {} is outside the open interval (0, 1)",
                e.train_fraction
            )));
        }
        if !(0.0..=1.0).contains(&e.rare_threshold) {
            return Err(Error::config(format!(
                "experiment.rare_threshold = {} must lie in [0, 1]",
                e.rare_threshold
            )));
        }
        if let Some(f) = &self.cohort.format {
            f.parse::<crate::cohort::CohortFormat>()?;
        }
        if self.cohort.path.is_none() {
            self.cohort.synthetic.validate()?;
        }
        self.cart.leaf_size.validate().map_err(|err| prefix("cart", err))?;
        let l = &self.lasso;
        if l.grid_size == 0 || !(l.grid_ratio > 1.0) {
            return Err(Error::config(
                "lasso.grid_size must be at least 1 and lasso.grid_ratio above 1",
            ));
        }
        if let Some(g) = &l.grid {
            if g.is_empty() || g.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
                return Err(Error::config("lasso.grid must hold finite penalties >= 0"));
            }
        }
        self.rf.validate()?;
        self.gbm.validate()?;
        self.dnnd.validate()?;
        Ok(())
    }

    /// Resolves relative paths against the directory holding the config file.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.cohort.path);
        fix(&mut self.tables.risky);
        fix(&mut self.tables.elixhauser);
        fix(&mut self.tables.mhdg);
    }
}

fn prefix(section: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::config(format!("{section}: {m}")),
        other => other,
    }
}

/// Reads, parses and validates a config file; also returns the raw bytes so
/// callers can hash exactly what was used.
pub fn parse_and_validate_config(path: &Path) -> Result<(Config, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::config(format!("{}: not UTF-8: {e}", path.display())))?;
    let mut cfg = Config::from_toml(text).map_err(|e| match e {
        Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if let Some(dir) = path.parent() {
        cfg.resolve_paths(dir);
    }
    Ok((cfg, bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_full_default() {
        let c = Config::from_toml("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.rf.n_trees, 25);
        assert_eq!(c.gbm.n_learners, 200);
        assert_eq!(c.dnnd.minibatch, 64);
        assert_eq!(c.experiment.models.len(), 5);
    }

    #[test]
    fn rho_out_of_range_names_bound() {
        let e = Config::from_toml("[gbm]\nrho = 1.5\n").unwrap_err().to_string();
        assert!(e.contains("gbm.rho") && e.contains("(0, 1)"), "{e}");
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        let e = Config::from_toml("[rf]\nn_tress = 3\n").unwrap_err().to_string();
        assert!(e.contains("n_tress"), "{e}");
        let e = Config::from_toml("[rf]\nn_trees = 3\nn_trees = 4\n").unwrap_err().to_string();
        assert!(e.contains("line 3") || e.contains("3:"), "{e}");
    }

    #[test]
    fn lists_and_sections_parse() {
        let c = Config::from_toml(
            "[experiment]\nmodels = [\"rf\", \"gbm\"]\nfeature_sets = [\"fs3\"]\n\
             [cohort.synthetic]\nn_patients = 50\nprevalence_by_horizon = { 15 = 0.1, 30 = 0.2 }\n\
             [cart]\nleaf_size = { rows = 3 }\n",
        )
        .unwrap();
        assert_eq!(c.experiment.models, vec![ModelKind::Rf, ModelKind::Gbm]);
        assert_eq!(c.experiment.feature_sets, vec![FeatureSet::FS3]);
        assert_eq!(c.cohort.synthetic.n_patients, 50);
        assert_eq!(c.cohort.synthetic.prevalence_by_horizon[&30], 0.2);
        assert_eq!(c.cart.leaf_size, LeafSize::Rows(3));
        let text = toml::to_string(&c).unwrap();
        assert_eq!(Config::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn model_list_parse() {
        let v: Vec<ModelKind> = parse_list("rf, gbm,dnnd").unwrap();
        assert_eq!(v, vec![ModelKind::Rf, ModelKind::Gbm, ModelKind::Dnnd]);
        assert!(parse_list::<ModelKind>("rf,xgb").is_err());
    }
}
