//! CART induction for classification (Gini) and regression (variance), with
//! optional random feature subsets at every split.
//!
//! Rows route left iff `x[feature] < threshold`. Thresholds sit at midpoints
//! between consecutive distinct values, so only the order of a column matters.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_binary_labels, Matrix};
use crate::numeric::seeded_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

/// Minimum number of training rows per leaf.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafSize {
    /// `max(floor(f * n), 2)` rows, where `n` is the size of the sample the tree is fit on.
    Fraction(f64),
    Rows(usize),
}

impl LeafSize {
    /// The leaf floor used throughout the experiments: `n/64`.
    pub const DEFAULT: LeafSize = LeafSize::Fraction(1.0 / 64.0);

    pub fn rows_for(self, n: usize) -> usize {
        match self {
            LeafSize::Fraction(f) => ((f * n as f64).floor() as usize).max(2),
            LeafSize::Rows(k) => k.max(1),
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            LeafSize::Fraction(f) if !(f > 0.0 && f <= 0.5) => Err(Error::config(format!(
                "min_leaf_fraction {f} must lie in (0, 0.5]"
            ))),
            LeafSize::Rows(0) => Err(Error::config("leaf size must be at least 1 row")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub task: Task,
    pub leaf_size: LeafSize,
    /// Features drawn per split; `None` considers every allowed feature.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl TreeParams {
    pub fn classification() -> Self {
        TreeParams {
            task: Task::Classification,
            leaf_size: LeafSize::DEFAULT,
            features_per_split: None,
            seed: 0,
        }
    }

    pub fn regression() -> Self {
        TreeParams {
            task: Task::Regression,
            ..Self::classification()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.leaf_size.validate()?;
        if self.features_per_split == Some(0) {
            return Err(Error::config("features_per_split must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
    },
    /// Classification leaves hold P(+1); regression leaves the mean target.
    Leaf { value: f64, n: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub task: Task,
    pub n_features: usize,
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::Arity {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.rows().map(|r| self.predict(r)).collect()
    }
}

pub fn predict_tree(tree: &Tree, x: &[f64]) -> Result<f64> {
    tree.predict(x)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Parent impurity minus the size-weighted child impurities.
    pub gain: f64,
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    s: f64,
    ss: f64,
}

impl Moments {
    fn add(&mut self, t: f64) {
        self.n += 1.0;
        self.s += t;
        self.ss += t * t;
    }

    fn minus(self, o: Moments) -> Moments {
        Moments {
            n: self.n - o.n,
            s: self.s - o.s,
            ss: self.ss - o.ss,
        }
    }

    fn impurity(self, task: Task) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        let m = self.s / self.n;
        match task {
            Task::Classification => 2.0 * m * (1.0 - m),
            Task::Regression => (self.ss / self.n - m * m).max(0.0),
        }
    }
}

fn moments(targets: &[f64], rows: &[usize]) -> Moments {
    let mut m = Moments::default();
    for &r in rows {
        m.add(targets[r]);
    }
    m
}

/// Best impurity-reducing split of `rows` over `candidates`, or `None` when
/// no split leaves `min_leaf` rows on both sides and strictly lowers impurity.
///
/// Classification targets are 0/1 indicators of the positive class. Among
/// equal gains the lowest feature index, then the lowest threshold, wins.
pub fn best_split(
    x: &Matrix,
    targets: &[f64],
    rows: &[usize],
    candidates: &[usize],
    task: Task,
    min_leaf: usize,
) -> Option<Split> {
    search_split(x, targets, rows, candidates, task, min_leaf, true)
}

// With `strict` off, the best legal split is returned even at zero gain.
fn search_split(
    x: &Matrix,
    targets: &[f64],
    rows: &[usize],
    candidates: &[usize],
    task: Task,
    min_leaf: usize,
    strict: bool,
) -> Option<Split> {
    let n = rows.len();
    let min_leaf = min_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let total = moments(targets, rows);
    let parent = total.impurity(task);
    if parent <= 0.0 {
        return None;
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let tol = if strict { parent * 1e-12 } else { f64::NEG_INFINITY };
    let mut best: Option<Split> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &f in &sorted {
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (x.get(r, f), targets[r])));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if pairs[0].0 == pairs[n - 1].0 {
            continue;
        }
        let mut left = Moments::default();
        for i in 0..n - 1 {
            left.add(pairs[i].1);
            let (lo, hi) = (pairs[i].0, pairs[i + 1].0);
            let nl = i + 1;
            if lo == hi || nl < min_leaf {
                continue;
            }
            if n - nl < min_leaf {
                break;
            }
            let right = total.minus(left);
            let gain = parent
                - (left.n * left.impurity(task) + right.n * right.impurity(task)) / total.n;
            if gain > tol && best.is_none_or(|b| gain > b.gain) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold <= lo {
                    threshold = hi;
                }
                best = Some(Split {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

/// Grows a tree on `rows` of `x` (duplicates allowed, as in a bootstrap),
/// drawing split candidates from `allowed` features.
pub(crate) fn grow_tree<R: Rng>(
    x: &Matrix,
    targets: &[f64],
    rows: Vec<usize>,
    allowed: &[usize],
    params: &TreeParams,
    rng: &mut R,
) -> Result<Tree> {
    params.validate()?;
    if rows.is_empty() {
        return Err(Error::data("cannot fit a tree on an empty training set"));
    }
    if allowed.is_empty() {
        return Err(Error::config("a tree needs at least one candidate feature"));
    }
    let min_leaf = params.leaf_size.rows_for(rows.len());
    let k = params
        .features_per_split
        .unwrap_or(allowed.len())
        .min(allowed.len());
    let leaf = |rows: &[usize]| {
        let m = moments(targets, rows);
        Node::Leaf {
            value: m.s / m.n,
            n: rows.len(),
        }
    };
    let mut nodes = vec![leaf(&rows)];
    let mut stack = vec![(0usize, rows)];
    let mut candidates = Vec::with_capacity(k);
    while let Some((id, rows)) = stack.pop() {
        candidates.clear();
        if k == allowed.len() {
            candidates.extend_from_slice(allowed);
        } else {
            candidates.extend(index::sample(rng, allowed.len(), k).into_iter().map(|i| allowed[i]));
        }
        // An impure node with no improving split (XOR-like) still splits at
        // zero gain so that trees with a small leaf floor can memorize.
        let Some(split) = search_split(x, targets, &rows, &candidates, params.task, min_leaf, true)
            .or_else(|| search_split(x, targets, &rows, &candidates, params.task, min_leaf, false))
        else {
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| x.get(i, split.feature) < split.threshold);
        let (li, ri) = (nodes.len(), nodes.len() + 1);
        nodes.push(leaf(&l));
        nodes.push(leaf(&r));
        nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: li,
            right: ri,
            gain: split.gain,
        };
        // Right first so the left subtree is expanded (and numbered) first.
        stack.push((ri, r));
        stack.push((li, l));
    }
    Ok(Tree {
        task: params.task,
        n_features: x.n_cols(),
        nodes,
    })
}

fn check_rows(x: &Matrix, n: usize) -> Result<()> {
    if x.n_rows() != n {
        return Err(Error::Arity {
            expected: x.n_rows(),
            got: n,
        });
    }
    if n == 0 {
        return Err(Error::data("cannot fit a tree on an empty training set"));
    }
    Ok(())
}

pub(crate) fn indicator_targets(y: &[i8]) -> Vec<f64> {
    y.iter().map(|&v| if v == 1 { 1.0 } else { 0.0 }).collect()
}

pub fn fit_classification_tree(x: &Matrix, y: &[i8], params: &TreeParams) -> Result<Tree> {
    check_rows(x, y.len())?;
    if let Some(bad) = y.iter().find(|&&v| v != 1 && v != -1) {
        return Err(Error::data(format!("label {bad} is not +1 or -1")));
    }
    let params = TreeParams {
        task: Task::Classification,
        ..params.clone()
    };
    let allowed: Vec<usize> = (0..x.n_cols()).collect();
    let mut rng = seeded_rng(params.seed, 0);
    grow_tree(x, &indicator_targets(y), (0..y.len()).collect(), &allowed, &params, &mut rng)
}

pub fn fit_regression_tree(x: &Matrix, targets: &[f64], params: &TreeParams) -> Result<Tree> {
    check_rows(x, targets.len())?;
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::data("regression targets must be finite"));
    }
    let params = TreeParams {
        task: Task::Regression,
        ..params.clone()
    };
    let allowed: Vec<usize> = (0..x.n_cols()).collect();
    let mut rng = seeded_rng(params.seed, 0);
    grow_tree(x, targets, (0..targets.len()).collect(), &allowed, &params, &mut rng)
}

/// The single-tree baseline: every feature at every split, leaf floor n/64.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartModel {
    pub tree: Tree,
}

impl CartModel {
    pub fn fit(x: &Matrix, y: &[i8], leaf_size: LeafSize) -> Result<Self> {
        check_binary_labels(y)?;
        let params = TreeParams {
            leaf_size,
            ..TreeParams::classification()
        };
        Ok(CartModel {
            tree: fit_classification_tree(x, y, &params)?,
        })
    }

    /// Returns P(+1) and the label at the 0.5 cut.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, i8)> {
        let p = self.tree.predict(x)?;
        Ok((p, if p >= 0.5 { 1 } else { -1 }))
    }
}
