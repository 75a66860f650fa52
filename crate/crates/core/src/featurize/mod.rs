//! Assessment-anchored featurization: outcome labels per horizon, history
//! binning, diagnosis-group mapping, assessment statistics, feature-set
//! assembly and rare-feature filtering.
//!
//! Every assessment is an anchor. Features see events on or before the
//! anchor day; labels see risky diagnoses strictly after it.

mod assemble;
mod binning;
mod export;
mod filter;
mod labels;
mod mapping;
mod stats;

pub use assemble::{build_feature_matrix, ColumnGroup, FeatureMatrix, FeatureSet, Featurizer};
pub use binning::{
    bin_events, binned_codes, code_prefix3, BinnedEvents, EventKind, IntervalScheme, DAYS_PER_MONTH,
};
pub use export::write_feature_csv;
pub use filter::{filter_rare_features, DEFAULT_RARE_THRESHOLD};
pub use labels::{assessment_anchors, label_outcomes, AnchorKey, RiskLabelSet, RiskyCodeTable, DEFAULT_HORIZONS};
pub use mapping::{map_diagnoses, MappingTable, MappingTables, UNMAPPED};
pub use stats::{aggregate_assessments, AssessmentStats};
