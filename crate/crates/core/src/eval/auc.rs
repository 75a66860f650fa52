use serde::Serialize;

use crate::error::{Error, Result};

/// Mann-Whitney AUC with a Hanley-McNeil 95% interval clipped to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AucResult {
    pub auc: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub se: f64,
    pub positives: usize,
    pub negatives: usize,
}

fn class_counts(labels: &[i8], scores: &[f64]) -> Result<(usize, usize)> {
    if labels.len() != scores.len() {
        return Err(Error::Arity {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::data(format!("score {s} is not a number")));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::data(
            "AUC needs at least one positive and one negative label",
        ));
    }
    Ok((pos, neg))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from midranks in `O(n log n)`.
pub fn auc_mann_whitney(labels: &[i8], scores: &[f64]) -> Result<AucResult> {
    let (pos, neg) = class_counts(labels, scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; the tied block i..=j shares the mean rank.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        let block_pos = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += mid * block_pos as f64;
        i = j + 1;
    }
    let (np, nn) = (pos as f64, neg as f64);
    let u = rank_sum - np * (np + 1.0) / 2.0;
    let auc = u / (np * nn);
    let se = hanley_mcneil_se(auc, pos, neg);
    Ok(AucResult {
        auc,
        ci_lo: (auc - 1.96 * se).max(0.0),
        ci_hi: (auc + 1.96 * se).min(1.0),
        se,
        positives: pos,
        negatives: neg,
    })
}

/// Standard error of the AUC from the Mann-Whitney variance, Hanley-McNeil form.
pub fn hanley_mcneil_se(auc: f64, positives: usize, negatives: usize) -> f64 {
    let (np, nn) = (positives as f64, negatives as f64);
    let q1 = auc / (2.0 - auc);
    let q2 = 2.0 * auc * auc / (1.0 + auc);
    let var = (auc * (1.0 - auc) + (np - 1.0) * (q1 - auc * auc) + (nn - 1.0) * (q2 - auc * auc))
        / (np * nn);
    var.max(0.0).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are called positive.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points from the strictest threshold down; tied scores move both rates
/// in one diagonal step. Starts at `(0, 0)` with an infinite threshold.
pub fn roc_curve(labels: &[i8], scores: &[f64]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = class_counts(labels, scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(out)
}

/// Trapezoidal area under [`roc_curve`].
pub fn auc_trapezoid(labels: &[i8], scores: &[f64]) -> Result<f64> {
    let roc = roc_curve(labels, scores)?;
    Ok(roc
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum())
}
