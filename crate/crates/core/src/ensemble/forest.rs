use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_binary_labels, Matrix};
use crate::numeric::seeded_rng;
use crate::trees::{grow_tree, indicator_targets, LeafSize, Task, Tree, TreeParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` means `floor(sqrt(p))`, at least 1.
    pub features_per_split: Option<usize>,
    pub leaf_size: LeafSize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 25,
            features_per_split: None,
            leaf_size: LeafSize::DEFAULT,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config("rf.n_trees must be at least 1"));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::config("rf.features_per_split must be at least 1"));
        }
        self.leaf_size.validate()
    }

    pub fn split_features(&self, p: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| ((p as f64).sqrt().floor() as usize).max(1))
            .min(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

pub fn fit_random_forest(x: &Matrix, y: &[i8], params: &ForestParams) -> Result<Forest> {
    params.validate()?;
    if x.n_rows() != y.len() {
        return Err(Error::Arity {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    check_binary_labels(y)?;
    let n = y.len();
    let p = x.n_cols();
    let targets = indicator_targets(y);
    let allowed: Vec<usize> = (0..p).collect();
    let tree_params = TreeParams {
        task: Task::Classification,
        leaf_size: params.leaf_size,
        features_per_split: Some(params.split_features(p)),
        seed: params.seed,
    };
    let mut trees = Vec::with_capacity(params.n_trees);
    for t in 0..params.n_trees {
        let mut rng = seeded_rng(params.seed, t as u64);
        let rows: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        trees.push(grow_tree(x, &targets, rows, &allowed, &tree_params, &mut rng)?);
    }
    Ok(Forest {
        n_features: p,
        trees,
    })
}

impl Forest {
    /// Mean positive-class probability over trees.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::Arity {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let s: f64 = self.trees.iter().map(|t| t.predict_unchecked(x)).sum();
        Ok(s / self.trees.len() as f64)
    }
}

/// Score in `[0, 1]` and label; a score of exactly 0.5 is labelled +1.
pub fn predict_forest(forest: &Forest, x: &[f64]) -> Result<(f64, i8)> {
    let s = forest.score(x)?;
    Ok((s, if s >= 0.5 { 1 } else { -1 }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::{fit_classification_tree, Node};

    fn leaf(v: f64) -> Tree {
        Tree {
            task: Task::Classification,
            n_features: 1,
            nodes: vec![Node::Leaf { value: v, n: 1 }],
        }
    }

    #[test]
    fn arithmetic_mean_and_tie_rule() {
        let f = Forest {
            n_features: 1,
            trees: vec![leaf(0.2), leaf(0.4)],
        };
        let (s, l) = predict_forest(&f, &[0.0]).unwrap();
        assert!((s - 0.3).abs() < 1e-15);
        assert_eq!(l, -1);
        let f = Forest {
            n_features: 1,
            trees: vec![leaf(0.25), leaf(0.75)],
        };
        assert_eq!(predict_forest(&f, &[0.0]).unwrap(), (0.5, 1));
        let f = Forest {
            n_features: 1,
            trees: vec![leaf(1.0); 3],
        };
        assert_eq!(predict_forest(&f, &[0.0]).unwrap(), (1.0, 1));
        assert!(predict_forest(&f, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn sqrt_p_rounding() {
        assert_eq!(ForestParams::default().split_features(109), 10);
        assert_eq!(ForestParams::default().split_features(1), 1);
    }

    #[test]
    fn single_tree_without_bootstrap_is_cart() {
        let x = Matrix::from_rows(&[
            [0.0, 3.0],
            [1.0, 1.0],
            [2.0, 2.0],
            [3.0, 0.0],
            [4.0, 5.0],
            [5.0, 4.0],
        ])
        .unwrap();
        let y = [-1, -1, 1, -1, 1, 1];
        let params = ForestParams {
            n_trees: 1,
            bootstrap: false,
            features_per_split: Some(2),
            leaf_size: LeafSize::Rows(1),
            seed: 9,
        };
        let f = fit_random_forest(&x, &y, &params).unwrap();
        let tp = TreeParams {
            leaf_size: LeafSize::Rows(1),
            ..TreeParams::classification()
        };
        let t = fit_classification_tree(&x, &y, &tp).unwrap();
        assert_eq!(f.trees[0], t);
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::zeros(3, 1);
        assert!(fit_random_forest(&x, &[1, 1, 1], &ForestParams::default()).is_err());
    }
}
