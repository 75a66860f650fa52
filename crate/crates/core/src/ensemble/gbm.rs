use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_binary_labels, Matrix};
use crate::numeric::{logistic_loss, seeded_rng};
use crate::trees::{grow_tree, LeafSize, Task, Tree, TreeParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbmParams {
    pub n_learners: usize,
    /// Fraction of training rows drawn (without replacement) per round.
    pub rho: f64,
    /// Features available to one learner; `None` means `min(floor(p/3), floor(sqrt(n)))`.
    pub learner_features: Option<usize>,
    /// Features drawn per split; `None` means `floor(m/3)`.
    pub split_features: Option<usize>,
    pub lr_start: f64,
    pub lr_cap: f64,
    pub leaf_size: LeafSize,
    pub seed: u64,
}

impl Default for GbmParams {
    fn default() -> Self {
        GbmParams {
            n_learners: 200,
            rho: 0.5,
            learner_features: None,
            split_features: None,
            lr_start: 0.001,
            lr_cap: 0.1,
            leaf_size: LeafSize::DEFAULT,
            seed: 0,
        }
    }
}

impl GbmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::config(format!(
                "gbm.rho = {} is outside the open interval (0, 1)",
                self.rho
            )));
        }
        if !(self.lr_start > 0.0 && self.lr_start < self.lr_cap) {
            return Err(Error::config(format!(
                "gbm learning rates need 0 < lr_start < lr_cap, got {} and {}",
                self.lr_start, self.lr_cap
            )));
        }
        if self.learner_features == Some(0) || self.split_features == Some(0) {
            return Err(Error::config("gbm feature subset sizes must be at least 1"));
        }
        self.leaf_size.validate()
    }

    /// `m`, the number of features one weak learner may use.
    pub fn learner_subset(&self, p: usize, n: usize) -> usize {
        let m = self.learner_features.unwrap_or_else(|| {
            let by_p = p / 3;
            let by_n = (n as f64).sqrt().floor() as usize;
            by_p.min(by_n)
        });
        m.clamp(1, p.max(1))
    }

    pub fn split_subset(&self, m: usize) -> usize {
        self.split_features.unwrap_or(m / 3).clamp(1, m.max(1))
    }

    /// Rows drawn per round: `floor(rho * n)`, at least 2 and at most `n`.
    pub fn subsample_size(&self, n: usize) -> usize {
        ((self.rho * n as f64).floor() as usize).max(2).min(n)
    }

    /// Learning-rate candidates: doubling from `lr_start`, capped at `lr_cap`.
    pub fn schedule(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut lr = self.lr_start;
        while lr < self.lr_cap {
            out.push(lr);
            lr *= 2.0;
        }
        out.push(self.lr_cap);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmStep {
    pub lambda: f64,
    pub tree: Tree,
    pub features: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub n_features: usize,
    pub intercept: f64,
    pub steps: Vec<GbmStep>,
}

impl GbmModel {
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::Arity {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.intercept
            + self
                .steps
                .iter()
                .map(|s| s.lambda * s.tree.predict_unchecked(x))
                .sum::<f64>())
    }
}

/// Returns `F(x)` and the label, +1 iff `F(x) >= 0`.
pub fn predict_gbm(model: &GbmModel, x: &[f64]) -> Result<(f64, i8)> {
    let f = model.margin(x)?;
    Ok((f, if f >= 0.0 { 1 } else { -1 }))
}

/// Negative gradient of `log(1 + exp(-yF))` with respect to `F`.
pub fn gbm_pseudo_residuals(y: &[i8], f: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(f)
        .map(|(&yi, &fi)| {
            let yi = f64::from(yi);
            let t = yi * fi;
            // y / (1 + e^t), written to stay finite for large |t|.
            if t > 0.0 {
                let e = (-t).exp();
                yi * e / (1.0 + e)
            } else {
                yi / (1.0 + t.exp())
            }
        })
        .collect()
}

fn mean_loss(y: &[i8], f: &[f64], rows: &[usize], h: &[f64], lambda: f64) -> f64 {
    rows.iter()
        .map(|&r| logistic_loss(f64::from(y[r]), f[r] + lambda * h[r]))
        .sum::<f64>()
        / rows.len() as f64
}

/// Walks the learning-rate schedule on `rows`, stopping at the first candidate
/// whose loss is not strictly below the previous one. Returns the last
/// improving candidate, or the first candidate if none improved.
pub fn line_search_step(
    h: &[f64],
    y: &[i8],
    f: &[f64],
    rows: &[usize],
    schedule: &[f64],
) -> f64 {
    let mut chosen = schedule[0];
    let mut prev = mean_loss(y, f, rows, h, schedule[0]);
    for &lr in &schedule[1..] {
        let l = mean_loss(y, f, rows, h, lr);
        if l < prev {
            chosen = lr;
            prev = l;
        } else {
            break;
        }
    }
    chosen
}

/// Per-round record from [`fit_gbm_traced`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundTrace {
    pub round: usize,
    pub lambda: f64,
    pub accepted: bool,
    /// Mean training log-loss after the round.
    pub train_loss: f64,
    pub mean_abs_margin: f64,
}

pub fn fit_gbm(x: &Matrix, y: &[i8], params: &GbmParams) -> Result<GbmModel> {
    fit_gbm_traced(x, y, params).map(|(m, _)| m)
}

pub fn fit_gbm_traced(
    x: &Matrix,
    y: &[i8],
    params: &GbmParams,
) -> Result<(GbmModel, Vec<RoundTrace>)> {
    params.validate()?;
    if x.n_rows() != y.len() {
        return Err(Error::Arity {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    let (pos, neg) = check_binary_labels(y)?;
    let n = y.len();
    let p = x.n_cols();
    if p == 0 {
        return Err(Error::data("gbm needs at least one feature"));
    }
    let intercept = (pos as f64 / neg as f64).ln();
    let m = params.learner_subset(p, n);
    let n_sub = params.subsample_size(n);
    let schedule = params.schedule();
    let tree_params = TreeParams {
        task: Task::Regression,
        leaf_size: params.leaf_size,
        features_per_split: Some(params.split_subset(m)),
        seed: params.seed,
    };
    let all: Vec<usize> = (0..n).collect();
    let mut rng = seeded_rng(params.seed, 0);
    let mut f = vec![intercept; n];
    let mut loss = mean_loss(y, &f, &all, &f, 0.0);
    let mut steps = Vec::new();
    let mut trace = Vec::with_capacity(params.n_learners);
    let mut h = vec![0.0; n];
    let mut next = vec![0.0; n];
    for round in 0..params.n_learners {
        let mut rows = index::sample(&mut rng, n, n_sub).into_vec();
        rows.sort_unstable();
        let mut features = index::sample(&mut rng, p, m).into_vec();
        features.sort_unstable();
        let residuals = gbm_pseudo_residuals(y, &f);
        let tree = grow_tree(x, &residuals, rows.clone(), &features, &tree_params, &mut rng)?;
        for (i, hi) in h.iter_mut().enumerate() {
            *hi = tree.predict_unchecked(x.row(i));
        }
        let lambda = line_search_step(&h, y, &f, &rows, &schedule);
        for i in 0..n {
            next[i] = f[i] + lambda * h[i];
        }
        let new_loss = mean_loss(y, &next, &all, &next, 0.0);
        let accepted = new_loss <= loss;
        if accepted {
            std::mem::swap(&mut f, &mut next);
            loss = new_loss;
            steps.push(GbmStep {
                lambda,
                tree,
                features,
            });
        }
        trace.push(RoundTrace {
            round,
            lambda,
            accepted,
            train_loss: loss,
            mean_abs_margin: f.iter().map(|v| v.abs()).sum::<f64>() / n as f64,
        });
    }
    Ok((
        GbmModel {
            n_features: p,
            intercept,
            steps,
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::Node;

    #[test]
    fn residual_formula() {
        let r = gbm_pseudo_residuals(&[1, -1, 1], &[0.0, 0.0, 20.0]);
        assert_eq!(r[0], 0.5);
        assert_eq!(r[1], -0.5);
        let want = 1.0 / (1.0 + 20f64.exp());
        assert!(((r[2] - want) / want).abs() < 1e-12);
        let big = gbm_pseudo_residuals(&[-1, 1], &[1e4, -1e4]);
        assert!(big.iter().all(|v| v.is_finite()));
        assert_eq!(big, vec![-1.0, 1.0]);
    }

    #[test]
    fn null_learner_keeps_lr_start() {
        let h = [0.0; 4];
        let y = [1, -1, 1, -1];
        let f = [0.0; 4];
        let lam = line_search_step(&h, &y, &f, &[0, 1, 2, 3], &GbmParams::default().schedule());
        assert_eq!(lam, 0.001);
    }

    #[test]
    fn schedule_doubles_to_cap() {
        let s = GbmParams::default().schedule();
        assert_eq!(s.len(), 8);
        assert_eq!(s[0], 0.001);
        assert_eq!(*s.last().unwrap(), 0.1);
        assert!(s.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn subset_sizes() {
        let g = GbmParams::default();
        let m = g.learner_subset(134, 10_000);
        assert_eq!(m, 44);
        assert_eq!(g.split_subset(m), 14);
        assert_eq!(g.learner_subset(2, 100), 1);
        assert_eq!(g.split_subset(1), 1);
    }

    #[test]
    fn two_rows_one_step() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let p = GbmParams {
            n_learners: 1,
            ..Default::default()
        };
        let model = fit_gbm(&x, &[1, -1], &p).unwrap();
        assert_eq!(model.intercept, 0.0);
        assert_eq!(model.steps.len(), 1);
    }

    #[test]
    fn prediction_arithmetic() {
        let model = GbmModel {
            n_features: 1,
            intercept: -0.1,
            steps: vec![GbmStep {
                lambda: 0.1,
                tree: Tree {
                    task: Task::Regression,
                    n_features: 1,
                    nodes: vec![Node::Leaf { value: 2.0, n: 1 }],
                },
                features: vec![0],
            }],
        };
        let (s, l) = predict_gbm(&model, &[0.0]).unwrap();
        assert!((s - 0.1).abs() < 1e-15);
        assert_eq!(l, 1);
        let empty = GbmModel {
            n_features: 1,
            intercept: 0.0,
            steps: vec![],
        };
        assert_eq!(predict_gbm(&empty, &[3.0]).unwrap(), (0.0, 1));
    }

    #[test]
    fn rho_bounds_named() {
        let p = GbmParams {
            rho: 1.5,
            ..Default::default()
        };
        let e = p.validate().unwrap_err().to_string();
        assert!(e.contains("(0, 1)"), "{e}");
    }
}
