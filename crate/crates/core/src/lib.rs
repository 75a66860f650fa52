//! Multi-horizon risk prediction from patient event timelines.
//!
//! The crate turns assessment-anchored patient histories into time-binned
//! feature matrices and fits five classifiers over several prediction
//! horizons: a CART tree, lasso logistic regression, a random forest, a
//! stochastic gradient boosting machine and a multitask dropout network.

pub mod cohort;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod featurize;
pub mod linear;
pub mod matrix;
pub mod neuralnet;
pub mod numeric;
pub mod trees;

pub use error::{Error, Result};
