use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info};
use serde::Serialize;

use super::archive::{ArchivedFeatureSet, ArchivedModel, ModelArchive};
use super::auc::{auc_mann_whitney, roc_curve, RocPoint};
use super::metrics::confusion_metrics;
use crate::cohort::{generate_synthetic_cohort, load_cohort, split_patients, CohortDataset, CohortFormat};
use crate::config::{Config, ModelKind};
use crate::ensemble::{fit_gbm, fit_random_forest, predict_forest, predict_gbm};
use crate::error::{Error, Result};
use crate::featurize::{
    filter_rare_features, label_outcomes, FeatureMatrix, FeatureSet, Featurizer, IntervalScheme,
    MappingTable, MappingTables, RiskLabelSet, RiskyCodeTable,
};
use crate::linear::{alpha_max, predict_logistic, tune_penalty};
use crate::matrix::Matrix;
use crate::neuralnet::DnndModel;
use crate::trees::CartModel;

/// Overall ratings at or above this value count as a positive clinician call.
pub const CLINICIAN_CUT: u8 = 2;

/// One (model, feature set, horizon, seed) cell on the validation split.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub model: String,
    pub feature_set: String,
    pub horizon_days: u32,
    pub n: usize,
    pub positives: usize,
    pub recall: f64,
    pub precision: f64,
    pub f_measure: f64,
    pub auc: f64,
    pub auc_ci_lo: f64,
    pub auc_ci_hi: f64,
    pub seed: u64,
}

/// Validation-split label prevalence for one horizon and seed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrevalenceRow {
    pub seed: u64,
    pub horizon_days: u32,
    pub n: usize,
    pub positives: usize,
    pub prevalence: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    pub prevalence: Vec<PrevalenceRow>,
}

pub const METRICS_HEADER: &str =
    "model,feature_set,horizon_days,n,positives,recall,precision,f_measure,auc,auc_ci_lo,auc_ci_hi,seed";

impl MetricReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(METRICS_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                r.model,
                r.feature_set,
                r.horizon_days,
                r.n,
                r.positives,
                r.recall,
                r.precision,
                r.f_measure,
                r.auc,
                r.auc_ci_lo,
                r.auc_ci_hi,
                r.seed
            );
        }
        s
    }

    pub fn prevalence_csv(&self) -> String {
        let mut s = String::from("seed,horizon_days,n,positives,prevalence\n");
        for p in &self.prevalence {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6}",
                p.seed, p.horizon_days, p.n, p.positives, p.prevalence
            );
        }
        s
    }

    pub fn find(&self, model: &str, feature_set: &str, horizon: u32) -> Vec<&MetricRow> {
        self.rows
            .iter()
            .filter(|r| r.model == model && r.feature_set == feature_set && r.horizon_days == horizon)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocRecord {
    pub model: String,
    pub feature_set: String,
    pub horizon_days: u32,
    pub seed: u64,
    pub points: Vec<RocPoint>,
}

impl RocRecord {
    pub fn file_name(&self, with_seed: bool) -> String {
        if with_seed {
            format!("{}_{}_{}d_s{}.csv", self.model, self.feature_set, self.horizon_days, self.seed)
        } else {
            format!("{}_{}_{}d.csv", self.model, self.feature_set, self.horizon_days)
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{:.6},{:.6}", p.threshold, p.fpr, p.tpr);
        }
        s
    }
}

pub struct ExperimentOutput {
    pub report: MetricReport,
    pub roc: Vec<RocRecord>,
    /// Models fitted on the first repeat.
    pub archive: ModelArchive,
}

/// Risky-code and diagnosis-group tables named by the config, or the shipped stubs.
#[derive(Clone, Debug)]
pub struct Resources {
    pub risky: RiskyCodeTable,
    pub tables: MappingTables,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_resources(cfg: &Config) -> Result<Resources> {
    let t = &cfg.tables;
    let risky = match &t.risky {
        Some(p) => RiskyCodeTable::parse(&read_text(p)?)?,
        None => RiskyCodeTable::stub(),
    };
    let elixhauser = match &t.elixhauser {
        Some(p) => MappingTable::parse(&read_text(p)?)?,
        None => MappingTable::stub_elixhauser(),
    };
    let mhdg = match &t.mhdg {
        Some(p) => MappingTable::parse(&read_text(p)?)?,
        None => MappingTable::stub_mhdg(),
    };
    Ok(Resources {
        risky,
        tables: MappingTables { elixhauser, mhdg },
    })
}

/// Loads the configured cohort file, or generates the synthetic cohort from
/// the experiment seed.
pub fn load_cohort_for(cfg: &Config) -> Result<CohortDataset> {
    match &cfg.cohort.path {
        Some(path) => {
            let format = match &cfg.cohort.format {
                Some(f) => f.parse()?,
                None => CohortFormat::detect(path)?,
            };
            load_cohort(path, format)
        }
        None => generate_synthetic_cohort(&cfg.cohort.synthetic, cfg.experiment.seed),
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one fit: mixes the repeat seed, the module's own seed and the cell.
pub fn cell_seed(repeat_seed: u64, section_seed: u64, model: ModelKind, fs: FeatureSet, horizon: u32) -> u64 {
    let model_code = ModelKind::DEFAULT
        .iter()
        .chain([&ModelKind::Clinician])
        .position(|m| *m == model)
        .unwrap_or(0) as u64;
    let fs_code = FeatureSet::ALL.iter().position(|f| *f == fs).unwrap_or(0) as u64;
    let mut h = splitmix(repeat_seed);
    for v in [section_seed, model_code, fs_code, u64::from(horizon)] {
        h = splitmix(h ^ v);
    }
    h
}

fn score_rows(x: &Matrix, f: impl Fn(&[f64]) -> Result<(f64, i8)>) -> Result<(Vec<f64>, Vec<i8>)> {
    let mut scores = Vec::with_capacity(x.n_rows());
    let mut labels = Vec::with_capacity(x.n_rows());
    for row in x.rows() {
        let (s, l) = f(row)?;
        scores.push(s);
        labels.push(l);
    }
    Ok((scores, labels))
}

struct CellResult {
    row: MetricRow,
    roc: RocRecord,
}

fn evaluate_cell(
    model: ModelKind,
    feature_set: &str,
    horizon: u32,
    seed: u64,
    truth: &[i8],
    scores: &[f64],
    predicted: &[i8],
) -> Result<CellResult> {
    let cm = confusion_metrics(truth, predicted)?;
    let auc = auc_mann_whitney(truth, scores)?;
    let points = roc_curve(truth, scores)?;
    Ok(CellResult {
        row: MetricRow {
            model: model.name().to_string(),
            feature_set: feature_set.to_string(),
            horizon_days: horizon,
            n: truth.len(),
            positives: auc.positives,
            recall: cm.recall,
            precision: cm.precision,
            f_measure: cm.f_measure,
            auc: auc.auc,
            auc_ci_lo: auc.ci_lo,
            auc_ci_hi: auc.ci_hi,
            seed,
        },
        roc: RocRecord {
            model: model.name().to_string(),
            feature_set: feature_set.to_string(),
            horizon_days: horizon,
            seed,
            points,
        },
    })
}

/// Penalty grid for the lasso: log-spaced from `alpha_max` down by `grid_ratio`.
pub fn lasso_grid(cfg: &Config, x: &Matrix, y: &[i8]) -> Result<Vec<f64>> {
    if let Some(g) = &cfg.lasso.grid {
        return Ok(g.clone());
    }
    let amax = alpha_max(x, y)?;
    let k = cfg.lasso.grid_size;
    if k == 1 {
        return Ok(vec![amax]);
    }
    Ok((0..k)
        .map(|i| amax * cfg.lasso.grid_ratio.powf(-(i as f64) / (k - 1) as f64))
        .collect())
}

/// Clinician baseline: the overall rating at each validation anchor.
fn clinician_scores(valid: &CohortDataset, labels: &RiskLabelSet) -> (Vec<f64>, Vec<i8>) {
    labels
        .anchors
        .iter()
        .map(|a| {
            let r = valid.patients[a.patient_index].timeline.assessments[a.assessment_index].overall;
            (f64::from(r), if r >= CLINICIAN_CUT { 1 } else { -1 })
        })
        .unzip()
}

struct Prepared {
    featurizer: Featurizer,
    columns: Vec<String>,
    train: FeatureMatrix,
    valid: FeatureMatrix,
}

fn prepare_feature_set(
    cfg: &Config,
    res: &Resources,
    fs: FeatureSet,
    train: &CohortDataset,
    valid: &CohortDataset,
    train_labels: &RiskLabelSet,
    valid_labels: &RiskLabelSet,
) -> Result<Prepared> {
    let featurizer = Featurizer::fit(train, fs, res.tables.clone(), IntervalScheme::default());
    let raw = featurizer.transform(train, &train_labels.anchors)?;
    let (train_x, columns) = filter_rare_features(&raw, cfg.experiment.rare_threshold)?;
    let valid_x = featurizer
        .transform(valid, &valid_labels.anchors)?
        .align_to(&columns)?;
    info!(
        "{fs}: {} columns before filtering, {} kept; {} train rows, {} validation rows",
        raw.n_cols(),
        columns.len(),
        train_x.n_rows(),
        valid_x.n_rows()
    );
    Ok(Prepared {
        featurizer,
        columns,
        train: train_x,
        valid: valid_x,
    })
}

/// Runs the full protocol on the cohort named by `cfg`.
pub fn run_experiment(cfg: &Config) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let dataset = load_cohort_for(cfg)?;
    let res = load_resources(cfg)?;
    run_experiment_on(cfg, &dataset, &res)
}

/// Split, label, featurize per feature set, filter on train, fit every
/// selected model per horizon (the dropout net once per feature set, across
/// all horizons) and score the validation split.
pub fn run_experiment_on(cfg: &Config, dataset: &CohortDataset, res: &Resources) -> Result<ExperimentOutput> {
    cfg.validate()?;
    dataset.validate()?;
    let e = &cfg.experiment;
    let horizons = &e.horizons;
    let mut report = MetricReport::default();
    let mut roc = Vec::new();
    let mut archive = ModelArchive::new(e.seed, horizons.clone(), res.risky.clone());

    for r in 0..e.repeats {
        let seed = e.seed.wrapping_add(r as u64);
        let keep = r == 0;
        let (train, valid) = split_patients(dataset, e.train_fraction, seed)?;
        let train_labels = label_outcomes(&train, &res.risky, horizons)?;
        let valid_labels = label_outcomes(&valid, &res.risky, horizons)?;
        for (hi, &h) in horizons.iter().enumerate() {
            let col = valid_labels.column(hi);
            let positives = col.iter().filter(|&&y| y == 1).count();
            report.prevalence.push(PrevalenceRow {
                seed,
                horizon_days: h,
                n: col.len(),
                positives,
                prevalence: valid_labels.prevalence(hi),
            });
        }
        info!(
            "seed {seed}: {} train and {} validation anchors",
            train_labels.len(),
            valid_labels.len()
        );

        for &fs in &e.feature_sets {
            let fs_name = fs.name();
            let prep = prepare_feature_set(cfg, res, fs, &train, &valid, &train_labels, &valid_labels)
                .map_err(|err| err.in_cell("*", fs_name, "*"))?;
            if keep {
                archive.feature_sets.push(ArchivedFeatureSet {
                    featurizer: prep.featurizer.clone(),
                    columns: prep.columns.clone(),
                });
            }
            for &model in &e.models {
                match model {
                    ModelKind::Clinician => continue,
                    ModelKind::Dnnd => {
                        let cells = run_dnnd(cfg, seed, fs, &prep, &train_labels, &valid_labels, keep, &mut archive)
                            .map_err(|err| err.in_cell(model.name(), fs_name, "*"))?;
                        for c in cells {
                            report.rows.push(c.row);
                            roc.push(c.roc);
                        }
                    }
                    _ => {
                        for (hi, &h) in horizons.iter().enumerate() {
                            let c = run_single(
                                cfg,
                                model,
                                seed,
                                fs,
                                h,
                                &prep,
                                &train_labels.column(hi),
                                &valid_labels.column(hi),
                                keep,
                                &mut archive,
                            )
                            .map_err(|err| err.in_cell(model.name(), fs_name, &h.to_string()))?;
                            report.rows.push(c.row);
                            roc.push(c.roc);
                        }
                    }
                }
            }
        }
        if e.models.contains(&ModelKind::Clinician) {
            let (scores, predicted) = clinician_scores(&valid, &valid_labels);
            for (hi, &h) in horizons.iter().enumerate() {
                let c = evaluate_cell(
                    ModelKind::Clinician,
                    "none",
                    h,
                    seed,
                    &valid_labels.column(hi),
                    &scores,
                    &predicted,
                )
                .map_err(|err| err.in_cell("clinician", "none", &h.to_string()))?;
                report.rows.push(c.row);
                roc.push(c.roc);
            }
        }
    }
    Ok(ExperimentOutput {
        report,
        roc,
        archive,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_single(
    cfg: &Config,
    model: ModelKind,
    seed: u64,
    fs: FeatureSet,
    h: u32,
    prep: &Prepared,
    y_train: &[i8],
    y_valid: &[i8],
    keep: bool,
    archive: &mut ModelArchive,
) -> Result<CellResult> {
    let start = Instant::now();
    let (x, xv) = (&prep.train.values, &prep.valid.values);
    let (scores, predicted, stored) = match model {
        ModelKind::Cart => {
            let m = CartModel::fit(x, y_train, cfg.cart.leaf_size)?;
            let (s, l) = score_rows(xv, |r| m.predict(r))?;
            debug!("cart {fs} {h}d: {} leaves", m.tree.n_leaves());
            (s, l, ArchivedModel::Cart { feature_set: fs, horizon_days: h, model: m })
        }
        ModelKind::Lasso => {
            let grid = lasso_grid(cfg, x, y_train)?;
            let (alpha, m, _) = tune_penalty(x, y_train, xv, y_valid, Some(&grid))?;
            debug!("lasso {fs} {h}d: alpha {alpha:.3e}, {} nonzero", m.n_nonzero());
            let (s, l) = score_rows(xv, |r| predict_logistic(&m, r))?;
            (s, l, ArchivedModel::Lasso { feature_set: fs, horizon_days: h, model: m })
        }
        ModelKind::Rf => {
            let mut p = cfg.rf.clone();
            p.seed = cell_seed(seed, cfg.rf.seed, model, fs, h);
            let m = fit_random_forest(x, y_train, &p)?;
            let (s, l) = score_rows(xv, |r| predict_forest(&m, r))?;
            (s, l, ArchivedModel::Forest { feature_set: fs, horizon_days: h, model: m })
        }
        ModelKind::Gbm => {
            let mut p = cfg.gbm.clone();
            p.seed = cell_seed(seed, cfg.gbm.seed, model, fs, h);
            let m = fit_gbm(x, y_train, &p)?;
            let (s, l) = score_rows(xv, |r| predict_gbm(&m, r))?;
            (s, l, ArchivedModel::Gbm { feature_set: fs, horizon_days: h, model: m })
        }
        ModelKind::Dnnd | ModelKind::Clinician => unreachable!("handled by the caller"),
    };
    let cell = evaluate_cell(model, fs.name(), h, seed, y_valid, &scores, &predicted)?;
    info!(
        "{model} {fs} {h}d: AUC {:.3}, F {:.3} ({:.1?})",
        cell.row.auc,
        cell.row.f_measure,
        start.elapsed()
    );
    if keep {
        archive.models.push(stored);
    }
    Ok(cell)
}

#[allow(clippy::too_many_arguments)]
fn run_dnnd(
    cfg: &Config,
    seed: u64,
    fs: FeatureSet,
    prep: &Prepared,
    train_labels: &RiskLabelSet,
    valid_labels: &RiskLabelSet,
    keep: bool,
    archive: &mut ModelArchive,
) -> Result<Vec<CellResult>> {
    let start = Instant::now();
    let horizons = &cfg.experiment.horizons;
    let y: Vec<Vec<i8>> = (0..horizons.len()).map(|k| train_labels.column(k)).collect();
    let mut schedule = cfg.dnnd.clone();
    schedule.seed = cell_seed(seed, cfg.dnnd.seed, ModelKind::Dnnd, fs, 0);
    let (model, report) = DnndModel::fit(&prep.train.values, &y, &schedule)?;
    for w in &report.warnings {
        log::warn!("dnnd {fs}: {w}");
    }
    let preds: Vec<_> = prep
        .valid
        .values
        .rows()
        .map(|r| model.predict(r))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(horizons.len());
    for (k, &h) in horizons.iter().enumerate() {
        let scores: Vec<f64> = preds.iter().map(|p| p[k].probability).collect();
        let labels: Vec<i8> = preds.iter().map(|p| p[k].label).collect();
        let cell = evaluate_cell(ModelKind::Dnnd, fs.name(), h, seed, &valid_labels.column(k), &scores, &labels)
            .map_err(|e| e.in_cell("dnnd", fs.name(), &h.to_string()))?;
        out.push(cell);
    }
    info!(
        "dnnd {fs}: best epoch {} of {}, {:.1?}",
        report.best_epoch + 1,
        report.loss_history.len(),
        start.elapsed()
    );
    if keep {
        archive.models.push(ArchivedModel::Dnnd {
            feature_set: fs,
            horizons: horizons.clone(),
            model,
        });
    }
    Ok(out)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `metrics.csv`, `prevalence.csv`, `roc/*.csv` and `models.json`
/// under `dir`; returns the written paths.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    let roc_dir = dir.join("roc");
    std::fs::create_dir_all(&roc_dir).map_err(|e| Error::io(&roc_dir, e))?;
    let mut written = Vec::new();
    let metrics = dir.join("metrics.csv");
    write_file(&metrics, &out.report.to_csv())?;
    written.push(metrics);
    let prevalence = dir.join("prevalence.csv");
    write_file(&prevalence, &out.report.prevalence_csv())?;
    written.push(prevalence);
    let multi_seed = out.roc.iter().any(|r| r.seed != out.roc[0].seed);
    for r in &out.roc {
        let p = roc_dir.join(r.file_name(multi_seed));
        write_file(&p, &r.to_csv())?;
        written.push(p);
    }
    let models = dir.join("models.json");
    out.archive.save(&models)?;
    written.push(models);
    Ok(written)
}
