use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConfusionMetrics {
    pub recall: f64,
    pub precision: f64,
    pub f_measure: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Recall, precision and F-measure of +1/-1 predictions.
///
/// Precision is 0 when nothing is predicted positive and F is 0 when
/// `R + P = 0`. Ground truth without positives is an error because recall is
/// undefined.
pub fn confusion_metrics(labels: &[i8], predicted: &[i8]) -> Result<ConfusionMetrics> {
    if labels.len() != predicted.len() {
        return Err(Error::Arity {
            expected: labels.len(),
            got: predicted.len(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&y, &p) in labels.iter().zip(predicted) {
        match (y == 1, p == 1) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp + fn_ == 0 {
        return Err(Error::data("ground truth has no positives; recall is undefined"));
    }
    let recall = tp as f64 / (tp + fn_) as f64;
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    Ok(ConfusionMetrics {
        recall,
        precision,
        f_measure: f_measure(recall, precision),
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
    })
}

/// `2RP / (R + P)`, or 0 when both are 0.
pub fn f_measure(recall: f64, precision: f64) -> f64 {
    if recall + precision == 0.0 {
        0.0
    } else {
        2.0 * recall * precision / (recall + precision)
    }
}
