//! Second-order gradient-boosted regression trees with logistic loss.
//!
//! Trees are grown depth-first with exact greedy split search over the
//! sorted distinct values of each feature. Missing values are routed by a
//! learned default direction.

mod objective;
mod split;
mod train;

use serde::{Deserialize, Serialize};

pub use objective::{leaf_weight, log_loss, logistic_grad_hess, sigmoid, split_gain};
pub use split::{find_best_split, midpoint, Direction, SplitCandidate};
pub use train::{train, train_columns, train_with, EarlyStopping, RoundStats, TrainOptions, TrainOutcome};

use crate::features::FeatureMatrix;
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtParams {
    pub num_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub colsample: f64,
    pub rng_seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            num_rounds: 300,
            learning_rate: 0.1,
            max_depth: 4,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample: 1.0,
            rng_seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("gbdt: {what}")));
        if self.num_rounds < 1 {
            return bad("num_rounds must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be >= 0");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be >= 0");
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return bad("min_child_weight must be >= 0");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must be in (0, 1]");
        }
        if !(self.colsample > 0.0 && self.colsample <= 1.0) {
            return bad("colsample must be in (0, 1]");
        }
        Ok(())
    }
}

/// One node of a tree; `id` is the node's index in the tree's node list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        id: usize,
        feature: usize,
        threshold: f64,
        default: Direction,
        left: usize,
        right: usize,
    },
    Leaf {
        id: usize,
        weight: f64,
    },
}

/// Regression tree stored as a node list with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Output for a row where `NaN` marks a missing value.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { weight, .. } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    default,
                    left,
                    right,
                    ..
                } => {
                    let x = row[*feature];
                    let go_left = if x.is_nan() { *default == Direction::Left } else { x < *threshold };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Leaf { weight, .. } => Some(*weight),
            TreeNode::Split { .. } => None,
        })
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        let bad = |why: String| Err(Error::Schema(format!("malformed tree: {why}")));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                TreeNode::Leaf { id, weight } => {
                    if *id != i || !weight.is_finite() {
                        return bad(format!("leaf {i}"));
                    }
                }
                TreeNode::Split {
                    id,
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if *id != i || *feature >= n_features || !threshold.is_finite() {
                        return bad(format!("split {i}"));
                    }
                    for &c in [left, right] {
                        if c <= i || c >= self.nodes.len() {
                            return bad(format!("node {i} child {c}"));
                        }
                        parents[c] += 1;
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return bad("nodes do not form a single tree".into());
        }
        Ok(())
    }
}

/// A trained ensemble bound to an ordered list of feature names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub version: u32,
    pub base_score: f64,
    pub params: GbdtParams,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
}

impl GbdtModel {
    pub fn predict_raw_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().fold(self.base_score, |acc, t| acc + t.predict_row(row))
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.predict_raw_row(row))
    }

    fn check_schema(&self, names: &[String]) -> Result<()> {
        for (i, expected) in self.feature_names.iter().enumerate() {
            match names.get(i) {
                Some(n) if n == expected => {}
                Some(n) => return Err(Error::Schema(format!("column {i} is {n:?}, model expects {expected:?}"))),
                None => return Err(Error::Schema(format!("column {i} ({expected:?}) missing"))),
            }
        }
        if let Some(extra) = names.get(self.feature_names.len()) {
            return Err(Error::Schema(format!("unexpected column {extra:?}")));
        }
        Ok(())
    }

    /// Raw log-odds for every matrix row.
    pub fn predict_raw(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_schema(&matrix.schema().names())?;
        let n = matrix.n_cols();
        let mut row = vec![0.0; n];
        Ok((0..matrix.n_rows())
            .map(|r| {
                for (c, cell) in row.iter_mut().enumerate() {
                    *cell = matrix.get(r, c).unwrap_or(f64::NAN);
                }
                self.predict_raw_row(&row)
            })
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!("unsupported model version {}", model.version)));
        }
        if !model.base_score.is_finite() {
            return Err(Error::Schema("base_score must be finite".into()));
        }
        for tree in &model.trees {
            tree.validate(model.feature_names.len())?;
        }
        Ok(model)
    }
}

/// Probabilities for every row of `matrix`.
pub fn predict(model: &GbdtModel, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
    Ok(model.predict_raw(matrix)?.into_iter().map(sigmoid).collect())
}

/// Column-major copy of the matrix with `NaN` for missing cells.
pub fn columns_of(matrix: &FeatureMatrix) -> Vec<Vec<f64>> {
    (0..matrix.n_cols())
        .map(|c| (0..matrix.n_rows()).map(|r| matrix.get(r, c).unwrap_or(f64::NAN)).collect())
        .collect()
}
