use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::net::{
    accumulate_gradients, init_network, sample_masks_into, sgd_step, zeros_like, Cache, Deltas,
    Mode, NetArchitecture, Network,
};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, Standardizer};
use crate::numeric::{seeded_rng, sigmoid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSchedule {
    pub hidden: Vec<usize>,
    pub minibatch: usize,
    pub lr_start: f64,
    pub lr_stop: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub max_norm: f64,
    /// Keep probability of the dropout masks on hidden units and inputs.
    pub dropout_rate: f64,
    pub input_dropout: bool,
    /// Relative loss improvement that counts as progress.
    pub plateau_tolerance: f64,
    pub plateau_patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            hidden: vec![50, 50],
            minibatch: 64,
            lr_start: 0.1,
            lr_stop: 1e-4,
            momentum: 0.9,
            weight_decay: 1e-4,
            max_norm: 1.0,
            dropout_rate: 0.5,
            input_dropout: true,
            plateau_tolerance: 1e-4,
            plateau_patience: 2,
            max_epochs: 200,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if !(self.dropout_rate > 0.0 && self.dropout_rate < 1.0) {
            return bad(format!(
                "dnnd.dropout_rate = {} is outside the open interval (0, 1)",
                self.dropout_rate
            ));
        }
        if self.minibatch == 0 || self.max_epochs == 0 || self.plateau_patience == 0 {
            return bad("dnnd.minibatch, max_epochs and plateau_patience must be positive".into());
        }
        if !(self.lr_start > 0.0 && self.lr_stop > 0.0 && self.lr_stop < self.lr_start) {
            return bad(format!(
                "dnnd learning rates need 0 < lr_stop < lr_start, got {} and {}",
                self.lr_stop, self.lr_start
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay < 0.0 || !(self.max_norm > 0.0) {
            return bad("dnnd.momentum must lie in [0, 1), weight_decay >= 0, max_norm > 0".into());
        }
        if self.hidden.contains(&0) {
            return bad("dnnd.hidden layer widths must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-example training loss (masked passes) of every epoch.
    pub loss_history: Vec<f64>,
    /// Learning rate used in every epoch.
    pub lr_history: Vec<f64>,
    pub best_epoch: usize,
    pub final_lr: f64,
    pub hit_max_epochs: bool,
    pub warnings: Vec<String>,
}

/// Trains a multitask network. `y` holds one label column per task, each
/// aligned with the rows of `x`.
pub fn train_dnnd(
    x: &Matrix,
    y: &[Vec<i8>],
    arch: &NetArchitecture,
    schedule: &TrainSchedule,
) -> Result<(Network, TrainReport)> {
    schedule.validate()?;
    arch.validate()?;
    let n = x.n_rows();
    if arch.input_dim != x.n_cols() {
        return Err(Error::Arity {
            expected: arch.input_dim,
            got: x.n_cols(),
        });
    }
    if y.len() != arch.n_tasks {
        return Err(Error::Arity {
            expected: arch.n_tasks,
            got: y.len(),
        });
    }
    if n == 0 {
        return Err(Error::data("cannot train a network on zero rows"));
    }
    for col in y {
        if col.len() != n {
            return Err(Error::Arity {
                expected: n,
                got: col.len(),
            });
        }
        if let Some(bad) = col.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::data(format!("label {bad} is not +1 or -1")));
        }
    }
    let labels: Vec<Vec<i8>> = (0..n).map(|i| y.iter().map(|c| c[i]).collect()).collect();

    let mut report = TrainReport::default();
    if n == 1 {
        let w = "training set has a single row; the fit is degenerate".to_string();
        warn!("{w}");
        report.warnings.push(w);
    }

    let mut net = init_network(arch, schedule.seed)?;
    net.dropout_rate = schedule.dropout_rate;
    net.input_dropout = schedule.input_dropout;
    let mut velocity = zeros_like(&net);
    let mut grads = zeros_like(&net);
    let mut cache = Cache::new(&net);
    let mut deltas = Deltas::new(&net);
    let mut rng = seeded_rng(schedule.seed, 1);
    let mut order: Vec<usize> = (0..n).collect();

    let mut lr = schedule.lr_start;
    let mut best = (f64::INFINITY, net.clone(), 0usize);
    let mut stall = 0;
    for epoch in 0..schedule.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(schedule.minibatch) {
            grads.iter_mut().for_each(|g| {
                g.w.fill(0.0);
                g.b.fill(0.0);
            });
            let weight = 1.0 / batch.len() as f64;
            for &i in batch {
                sample_masks_into(&net, &mut rng, &mut cache);
                net.forward_into(x.row(i), &mut cache);
                total += accumulate_gradients(&net, &cache, &labels[i], weight, &mut grads, &mut deltas);
            }
            sgd_step(
                &mut net,
                &mut velocity,
                &grads,
                lr,
                schedule.momentum,
                schedule.weight_decay,
                schedule.max_norm,
            );
            debug_assert!(max_norm_holds(&net, schedule.max_norm));
        }
        let loss = total / n as f64;
        if !loss.is_finite() {
            return Err(Error::data(format!("training loss diverged at epoch {epoch}")));
        }
        report.loss_history.push(loss);
        report.lr_history.push(lr);

        let improved = best.0.is_infinite() || (best.0 - loss) / best.0 > schedule.plateau_tolerance;
        if loss < best.0 {
            best = (loss, net.clone(), epoch);
        }
        if improved {
            stall = 0;
        } else {
            stall += 1;
            if stall >= schedule.plateau_patience {
                lr /= 2.0;
                stall = 0;
            }
        }
        if lr < schedule.lr_stop {
            break;
        }
        if epoch + 1 == schedule.max_epochs {
            report.hit_max_epochs = true;
        }
    }
    report.final_lr = lr;
    report.best_epoch = best.2;
    Ok((best.1, report))
}

fn max_norm_holds(net: &Network, c: f64) -> bool {
    let n_hidden = net.layers.len() - 1;
    net.layers[..n_hidden].iter().all(|l| {
        (0..l.n_out).all(|j| l.row(j).iter().map(|w| w * w).sum::<f64>().sqrt() <= c * (1.0 + 1e-12))
    })
}

/// Per-horizon prediction from a test-mode pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaskPrediction {
    pub score: f64,
    pub probability: f64,
    pub label: i8,
}

/// Test-mode scores, probabilities and labels (+1 iff score >= 0) for every task.
pub fn predict_dnnd(net: &Network, x: &[f64]) -> Result<Vec<TaskPrediction>> {
    Ok(net
        .scores(x, Mode::Test)?
        .into_iter()
        .map(|f| TaskPrediction {
            score: f,
            probability: sigmoid(f),
            label: if f >= 0.0 { 1 } else { -1 },
        })
        .collect())
}

/// A network together with the input standardization fitted on its training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnndModel {
    pub standardizer: Standardizer,
    pub net: Network,
    pub schedule: TrainSchedule,
}

impl DnndModel {
    pub fn fit(x: &Matrix, y: &[Vec<i8>], schedule: &TrainSchedule) -> Result<(Self, TrainReport)> {
        let standardizer = Standardizer::fit(x);
        let xs = standardizer.transform(x)?;
        let arch = NetArchitecture::new(x.n_cols(), schedule.hidden.clone(), y.len())?;
        let (net, report) = train_dnnd(&xs, y, &arch, schedule)?;
        Ok((
            DnndModel {
                standardizer,
                net,
                schedule: schedule.clone(),
            },
            report,
        ))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<TaskPrediction>> {
        predict_dnnd(&self.net, &self.standardizer.apply(x)?)
    }
}
