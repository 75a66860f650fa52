//! Validation metrics, the experiment protocol over (model, feature set,
//! horizon) cells, the model archive and the run manifest.

mod archive;
mod auc;
mod experiment;
mod manifest;
mod metrics;

pub use archive::{
    scores_to_csv, ArchivedFeatureSet, ArchivedModel, ModelArchive, ScoreRow, ARCHIVE_FORMAT,
    ARCHIVE_VERSION, SCORES_HEADER,
};
pub use auc::{auc_mann_whitney, auc_trapezoid, hanley_mcneil_se, roc_curve, AucResult, RocPoint};
pub use experiment::{
    cell_seed, lasso_grid, load_cohort_for, load_resources, run_experiment, run_experiment_on,
    write_outputs, ExperimentOutput, MetricReport, MetricRow, PrevalenceRow, Resources, RocRecord,
    CLINICIAN_CUT, METRICS_HEADER,
};
pub use manifest::{module_versions, run_to_dir, sha256_hex, RunManifest, RunStatus};
pub use metrics::{confusion_metrics, f_measure, ConfusionMetrics};
