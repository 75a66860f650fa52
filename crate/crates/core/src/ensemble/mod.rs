//! Random forest and stochastic gradient boosting on top of [`crate::trees`].

mod forest;
mod gbm;

pub use forest::{fit_random_forest, predict_forest, Forest, ForestParams};
pub use gbm::{
    fit_gbm, fit_gbm_traced, gbm_pseudo_residuals, line_search_step, predict_gbm, GbmModel,
    GbmParams, GbmStep, RoundTrace,
};
