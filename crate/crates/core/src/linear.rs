//! Lasso-penalized logistic regression fitted by cyclic coordinate descent,
//! with validation-set tuning of the penalty.
//!
//! The objective is `mean_i log(1 + exp(-y_i (b + w.x_i))) + alpha * |w|_1`
//! over standardized features. Each outer pass replaces the log-loss by its
//! second-order expansion at the current iterate and minimizes the penalized
//! quadratic by cyclic coordinate descent with soft-thresholding; a
//! backtracking step on the true objective keeps the passes monotone.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::confusion_metrics;
use crate::matrix::{check_binary_labels, Matrix, Standardizer};
use crate::numeric::{sigmoid, softplus};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_SWEEPS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub standardizer: Standardizer,
    /// Weights on the standardized features.
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub alpha: f64,
    /// Outer passes (quadratic approximations) taken.
    pub sweeps: usize,
    pub converged: bool,
    /// Objective value after every sweep.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl LassoModel {
    pub fn n_nonzero(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }

    /// Indices of features with a nonzero weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&j| self.weights[j] != 0.0)
            .collect()
    }

    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        let z = self.standardizer.apply(x)?;
        Ok(self.intercept + z.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>())
    }
}

/// Probability `1/(1+exp(-(w.x~ + b)))` and label (+1 iff p >= 0.5).
pub fn predict_logistic(model: &LassoModel, x: &[f64]) -> Result<(f64, i8)> {
    let p = sigmoid(model.margin(x)?);
    Ok((p, if p >= 0.5 { 1 } else { -1 }))
}

/// Column-major training data kept sparse; standardization is applied on
/// the fly as `(x - mean) / scale`.
struct Design {
    /// Row indices and raw values of the nonzero entries of every column.
    idx: Vec<Vec<u32>>,
    val: Vec<Vec<f64>>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    constant: Vec<bool>,
    t: Vec<f64>,
    y: Vec<f64>,
    standardizer: Standardizer,
}

impl Design {
    fn new(x: &Matrix, y: &[i8]) -> Result<Self> {
        if x.n_rows() != y.len() {
            return Err(Error::Arity {
                expected: x.n_rows(),
                got: y.len(),
            });
        }
        check_binary_labels(y)?;
        let standardizer = Standardizer::fit(x);
        let p = x.n_cols();
        let mut idx = vec![Vec::new(); p];
        let mut val = vec![Vec::new(); p];
        for (i, row) in x.rows().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    idx[j].push(i as u32);
                    val[j].push(v);
                }
            }
        }
        Ok(Design {
            idx,
            val,
            mean: standardizer.mean.clone(),
            scale: standardizer.scale.clone(),
            constant: standardizer.constant.clone(),
            t: y.iter().map(|&v| if v == 1 { 1.0 } else { 0.0 }).collect(),
            y: y.iter().map(|&v| f64::from(v)).collect(),
            standardizer,
        })
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn p(&self) -> usize {
        self.idx.len()
    }

    fn base_rate_logit(&self) -> f64 {
        let pos = self.t.iter().sum::<f64>();
        (pos / (self.n() as f64 - pos)).ln()
    }

    /// `sum_i a_i * x~_ij` given `sum_i a_i`.
    fn dot(&self, j: usize, a: &[f64], a_sum: f64) -> f64 {
        let raw: f64 = self.idx[j]
            .iter()
            .zip(&self.val[j])
            .map(|(&i, v)| v * a[i as usize])
            .sum();
        (raw - self.mean[j] * a_sum) / self.scale[j]
    }

    /// Smallest penalty at which the all-zero solution is optimal.
    fn alpha_max(&self) -> f64 {
        let n = self.n() as f64;
        let p0 = self.t.iter().sum::<f64>() / n;
        let g: Vec<f64> = self.t.iter().map(|t| p0 - t).collect();
        let g_sum = g.iter().sum::<f64>();
        (0..self.p())
            .filter(|&j| !self.constant[j])
            .map(|j| (self.dot(j, &g, g_sum) / n).abs())
            .fold(0.0, f64::max)
    }
}

/// Current iterate with its cached margins.
#[derive(Clone)]
struct State {
    w: Vec<f64>,
    b: f64,
    f: Vec<f64>,
}

impl State {
    fn null(d: &Design) -> Self {
        let b = d.base_rate_logit();
        State {
            w: vec![0.0; d.p()],
            b,
            f: vec![b; d.n()],
        }
    }
}

fn mean_loss(d: &Design, f: &[f64]) -> f64 {
    f.iter().zip(&d.y).map(|(f, y)| softplus(-y * f)).sum::<f64>() / d.n() as f64
}

fn l1(w: &[f64]) -> f64 {
    w.iter().map(|v| v.abs()).sum()
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Inner sweeps allowed per quadratic approximation.
const MAX_INNER_SWEEPS: usize = 10_000;

/// Curvature floor for the per-row Newton weights.
const MIN_WEIGHT: f64 = 1e-5;

/// Loosest inner tolerance, used on the first outer pass.
const MAX_INNER_TOL: f64 = 1e-3;

struct Solver<'a> {
    d: &'a Design,
    alpha: f64,
    /// Newton weights `p(1-p)` of the current approximation and their sum.
    wt: Vec<f64>,
    wt_sum: f64,
    /// Working residual `z - f` of the trial point is `r + offset`.
    r: Vec<f64>,
    offset: f64,
    /// Running `sum_i wt_i (r_i + offset)`.
    wr_sum: f64,
    r0: Vec<f64>,
    /// Per column: `sum wt x` and the weighted mean square of `x~`.
    wx: Vec<f64>,
    h: Vec<f64>,
    inner_tol: f64,
}

impl<'a> Solver<'a> {
    fn new(d: &'a Design, alpha: f64) -> Self {
        Solver {
            d,
            alpha,
            wt: vec![0.0; d.n()],
            wt_sum: 0.0,
            r: vec![0.0; d.n()],
            offset: 0.0,
            wr_sum: 0.0,
            r0: vec![0.0; d.n()],
            wx: vec![0.0; d.p()],
            h: vec![0.0; d.p()],
            inner_tol: MAX_INNER_TOL,
        }
    }

    fn intercept_step(&mut self, b: &mut f64) -> f64 {
        let delta = self.wr_sum / self.wt_sum;
        if delta != 0.0 {
            self.offset -= delta;
            self.wr_sum = 0.0;
            *b += delta;
        }
        delta.abs()
    }

    fn coordinate_step(&mut self, w: &mut [f64], j: usize) -> f64 {
        let d = self.d;
        let h = self.h[j];
        if d.constant[j] || h <= 0.0 {
            return 0.0;
        }
        let (idx, val) = (&d.idx[j], &d.val[j]);
        let (mu, sd) = (d.mean[j], d.scale[j]);
        // sum_i wt_i x~_ij (r_i + offset)
        let mut raw = 0.0;
        for (&i, v) in idx.iter().zip(val) {
            let i = i as usize;
            raw += self.wt[i] * v * self.r[i];
        }
        let g = (raw + self.offset * self.wx[j] - mu * self.wr_sum) / sd / d.n() as f64;
        let old = w[j];
        // A zero weight stays put within rounding of the threshold, so fits
        // at exactly `alpha_max` come back empty.
        if old == 0.0 && g.abs() <= self.alpha * (1.0 + 1e-9) {
            return 0.0;
        }
        let new = soft_threshold(g + h * old, self.alpha) / h;
        let delta = new - old;
        if delta != 0.0 {
            let s = delta / sd;
            for (&i, v) in idx.iter().zip(val) {
                self.r[i as usize] -= s * v;
            }
            self.offset += s * mu;
            self.wr_sum -= s * (self.wx[j] - mu * self.wt_sum);
            w[j] = new;
        }
        delta.abs()
    }

    fn inner_sweep(&mut self, w: &mut [f64], b: &mut f64, coords: &[usize]) -> f64 {
        // Refresh the running sum so rounding cannot accumulate across sweeps.
        self.wr_sum = self
            .wt
            .iter()
            .zip(&self.r)
            .map(|(w, r)| w * (r + self.offset))
            .sum();
        let mut max = self.intercept_step(b);
        for &j in coords {
            max = max.max(self.coordinate_step(w, j));
        }
        max
    }

    /// Minimizes the penalized quadratic approximation around `s` by cyclic
    /// coordinate descent, starting from `s` itself.
    fn solve_quadratic(&mut self, s: &State, tol: f64) -> (Vec<f64>, f64) {
        let d = self.d;
        let n = d.n() as f64;
        for i in 0..d.n() {
            let p = sigmoid(s.f[i]);
            let wt = (p * (1.0 - p)).max(MIN_WEIGHT);
            self.wt[i] = wt;
            self.r[i] = (d.t[i] - p) / wt;
        }
        self.offset = 0.0;
        self.wt_sum = self.wt.iter().sum();
        self.r0.copy_from_slice(&self.r);
        for j in 0..d.p() {
            let (mut wx, mut wx2) = (0.0, 0.0);
            for (&i, v) in d.idx[j].iter().zip(&d.val[j]) {
                let w = self.wt[i as usize];
                wx += w * v;
                wx2 += w * v * v;
            }
            let mu = d.mean[j];
            self.wx[j] = wx;
            self.h[j] = (wx2 - 2.0 * mu * wx + mu * mu * self.wt_sum) / (d.scale[j] * d.scale[j]) / n;
        }
        let all: Vec<usize> = (0..d.p()).collect();
        let mut w = s.w.clone();
        let mut b = s.b;
        let mut sweeps = 0;
        while sweeps < MAX_INNER_SWEEPS {
            let change = self.inner_sweep(&mut w, &mut b, &all);
            sweeps += 1;
            if change < tol {
                break;
            }
            while sweeps < MAX_INNER_SWEEPS {
                let active: Vec<usize> = all.iter().copied().filter(|&j| w[j] != 0.0).collect();
                let change = self.inner_sweep(&mut w, &mut b, &active);
                sweeps += 1;
                if change < tol {
                    break;
                }
            }
        }
        let offset = self.offset;
        self.r.iter_mut().for_each(|r| *r += offset);
        self.offset = 0.0;
        (w, b)
    }

    /// One outer pass: solve the local quadratic problem, then backtrack
    /// along the step until the true objective does not increase. Returns
    /// the largest coefficient change.
    fn outer_step(&mut self, s: &mut State, tol: f64) -> f64 {
        let d = self.d;
        let obj0 = mean_loss(d, &s.f) + self.alpha * l1(&s.w);
        let inner_tol = self.inner_tol.max(tol);
        let (w_new, b_new) = self.solve_quadratic(s, inner_tol);
        // Margins of the trial point follow from the residual change.
        let df: Vec<f64> = self.r0.iter().zip(&self.r).map(|(a, b)| a - b).collect();
        let mut t = 1.0;
        let mut f = vec![0.0; d.n()];
        let mut w = vec![0.0; s.w.len()];
        while t > 1e-12 {
            for i in 0..d.n() {
                f[i] = s.f[i] + t * df[i];
            }
            for j in 0..w.len() {
                w[j] = s.w[j] + t * (w_new[j] - s.w[j]);
            }
            let obj = mean_loss(d, &f) + self.alpha * l1(&w);
            if obj <= obj0 {
                let change = (0..w.len())
                    .map(|j| (w[j] - s.w[j]).abs())
                    .fold(t * (b_new - s.b).abs(), f64::max);
                s.b += t * (b_new - s.b);
                s.w = w;
                s.f = f;
                self.inner_tol = (0.1 * change).min(MAX_INNER_TOL);
                return change;
            }
            t *= 0.5;
        }
        if inner_tol > tol {
            // Retry with a tighter inner solve before giving up.
            self.inner_tol = tol;
            return f64::INFINITY;
        }
        0.0
    }

    /// Runs to convergence from `s`. Returns (passes, converged, objective trace).
    fn solve(&mut self, s: &mut State, tol: f64, max_sweeps: usize) -> (usize, bool, Vec<f64>) {
        let mut trace = vec![mean_loss(self.d, &s.f) + self.alpha * l1(&s.w)];
        for sweep in 1..=max_sweeps {
            let change = self.outer_step(s, tol);
            let obj = mean_loss(self.d, &s.f) + self.alpha * l1(&s.w);
            debug_assert!(obj <= trace[trace.len() - 1] * (1.0 + 1e-12));
            trace.push(obj);
            if change < tol {
                return (sweep, true, trace);
            }
        }
        (max_sweeps, false, trace)
    }
}

fn finish(d: &Design, s: &State, alpha: f64, sweeps: usize, converged: bool, trace: Vec<f64>) -> LassoModel {
    if !converged {
        warn!("lasso at alpha {alpha:.3e} stopped after {sweeps} sweeps without converging");
    }
    LassoModel {
        standardizer: d.standardizer.clone(),
        weights: s.w.clone(),
        intercept: s.b,
        alpha,
        sweeps,
        converged,
        objective_trace: trace,
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::config(format!("lasso penalty {alpha} must be finite and >= 0")));
    }
    Ok(())
}

pub fn fit_lasso_logistic(x: &Matrix, y: &[i8], alpha: f64) -> Result<LassoModel> {
    fit_lasso_logistic_with(x, y, alpha, DEFAULT_TOLERANCE, DEFAULT_MAX_SWEEPS)
}

pub fn fit_lasso_logistic_with(
    x: &Matrix,
    y: &[i8],
    alpha: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<LassoModel> {
    check_alpha(alpha)?;
    let d = Design::new(x, y)?;
    let mut s = State::null(&d);
    let mut solver = Solver::new(&d, alpha);
    let (sweeps, converged, trace) = solver.solve(&mut s, tol, max_sweeps);
    Ok(finish(&d, &s, alpha, sweeps, converged, trace))
}

/// Smallest penalty for which every weight is zero: `max_j |dL/dw_j|` at the
/// intercept-only model, on standardized features.
pub fn alpha_max(x: &Matrix, y: &[i8]) -> Result<f64> {
    Ok(Design::new(x, y)?.alpha_max())
}

/// `count` log-spaced penalties from `alpha_max` down to `alpha_max / 1000`.
pub fn default_grid(alpha_max: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![alpha_max];
    }
    (0..count)
        .map(|k| alpha_max * 10f64.powf(-3.0 * k as f64 / (count - 1) as f64))
        .collect()
}

/// Fits every penalty in `alphas`, largest first, warm-starting each fit from
/// the previous solution. Models come back in the order of `alphas`.
pub fn fit_lasso_path(x: &Matrix, y: &[i8], alphas: &[f64]) -> Result<Vec<LassoModel>> {
    for &a in alphas {
        check_alpha(a)?;
    }
    let d = Design::new(x, y)?;
    let mut order: Vec<usize> = (0..alphas.len()).collect();
    order.sort_by(|&a, &b| alphas[b].total_cmp(&alphas[a]));
    let mut s = State::null(&d);
    let mut out: Vec<Option<LassoModel>> = vec![None; alphas.len()];
    for k in order {
        let mut solver = Solver::new(&d, alphas[k]);
        let (sweeps, converged, trace) = solver.solve(&mut s, DEFAULT_TOLERANCE, DEFAULT_MAX_SWEEPS);
        log::debug!("alpha {:.3e}: {} passes", alphas[k], sweeps);
        out[k] = Some(finish(&d, &s, alphas[k], sweeps, converged, trace));
    }
    Ok(out.into_iter().map(|m| m.expect("every alpha fitted")).collect())
}

/// One grid point of [`tune_penalty`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TuningPoint {
    pub alpha: f64,
    pub validation_f: f64,
    pub n_nonzero: usize,
}

/// Fits every penalty on the training rows and keeps the one with the best
/// validation F-measure; ties go to the larger penalty. With no grid given,
/// 20 log-spaced values over `[alpha_max/1000, alpha_max]` are used.
pub fn tune_penalty(
    x_train: &Matrix,
    y_train: &[i8],
    x_val: &Matrix,
    y_val: &[i8],
    grid: Option<&[f64]>,
) -> Result<(f64, LassoModel, Vec<TuningPoint>)> {
    let grid = match grid {
        Some([]) => return Err(Error::config("lasso penalty grid is empty")),
        Some(g) => g.to_vec(),
        None => default_grid(alpha_max(x_train, y_train)?, 20),
    };
    let models = fit_lasso_path(x_train, y_train, &grid)?;
    let mut points = Vec::with_capacity(models.len());
    let mut best: Option<(f64, usize)> = None;
    for (k, m) in models.iter().enumerate() {
        let pred: Vec<i8> = x_val
            .rows()
            .map(|r| predict_logistic(m, r).map(|(_, l)| l))
            .collect::<Result<_>>()?;
        let f = confusion_metrics(y_val, &pred)?.f_measure;
        points.push(TuningPoint {
            alpha: m.alpha,
            validation_f: f,
            n_nonzero: m.n_nonzero(),
        });
        let better = match best {
            None => true,
            Some((bf, bk)) => f > bf || (f == bf && m.alpha > models[bk].alpha),
        };
        if better {
            best = Some((f, k));
        }
    }
    let (_, k) = best.expect("grid is non-empty");
    let model = models.into_iter().nth(k).expect("index in range");
    Ok((model.alpha, model, points))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Matrix, Vec<i8>) {
        let rows: Vec<[f64; 3]> = (0..60)
            .map(|i| {
                let a = ((i * 37) % 60) as f64 / 30.0 - 1.0;
                let b = ((i * 11) % 60) as f64 / 30.0 - 1.0;
                [a, b, 1.0]
            })
            .collect();
        let y = rows
            .iter()
            .enumerate()
            .map(|(i, r)| if r[0] + 0.3 * r[1] + if i % 7 == 0 { 2.0 } else { 0.0 } > 0.2 { 1 } else { -1 })
            .collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn huge_penalty_gives_null_model() {
        let (x, y) = data();
        let m = fit_lasso_logistic(&x, &y, 1e3).unwrap();
        assert_eq!(m.n_nonzero(), 0);
        let pos = y.iter().filter(|&&v| v == 1).count() as f64;
        assert!((m.intercept - (pos / (60.0 - pos)).ln()).abs() < 1e-12);
    }

    #[test]
    fn alpha_max_zeroes_everything_and_just_below_does_not() {
        let (x, y) = data();
        let a = alpha_max(&x, &y).unwrap();
        assert_eq!(fit_lasso_logistic(&x, &y, a).unwrap().n_nonzero(), 0);
        assert!(fit_lasso_logistic(&x, &y, 0.9 * a).unwrap().n_nonzero() > 0);
    }

    #[test]
    fn objective_never_increases() {
        let (x, y) = data();
        let m = fit_lasso_logistic(&x, &y, 0.001).unwrap();
        assert!(m.converged);
        assert!(m.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert_eq!(m.weights[2], 0.0);
    }

    #[test]
    fn hand_prediction() {
        let m = LassoModel {
            standardizer: Standardizer {
                mean: vec![0.0],
                scale: vec![1.0],
                constant: vec![false],
            },
            weights: vec![1.0],
            intercept: 0.0,
            alpha: 0.0,
            sweeps: 0,
            converged: true,
            objective_trace: vec![],
        };
        let (p, l) = predict_logistic(&m, &[1.0]).unwrap();
        assert!((p - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert_eq!(l, 1);
        let (p, l) = predict_logistic(&m, &[-1e6]).unwrap();
        assert_eq!((p, l), (0.0, -1));
        assert!(predict_logistic(&m, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn grid_shape() {
        let g = default_grid(2.0, 20);
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 2.0);
        assert!((g[19] - 0.002).abs() < 1e-15);
    }

    #[test]
    fn single_value_grid_is_returned() {
        let (x, y) = data();
        let (a, m, pts) = tune_penalty(&x, &y, &x, &y, Some(&[0.01])).unwrap();
        assert_eq!(a, 0.01);
        assert_eq!(m.alpha, 0.01);
        assert_eq!(pts.len(), 1);
        assert!(tune_penalty(&x, &y, &x, &y, Some(&[])).is_err());
    }

    #[test]
    fn ties_prefer_larger_penalty() {
        let (x, y) = data();
        // Both penalties zero every weight, so validation F is identical.
        let (a, _, _) = tune_penalty(&x, &y, &x, &y, Some(&[500.0, 1000.0])).unwrap();
        assert_eq!(a, 1000.0);
    }
}
