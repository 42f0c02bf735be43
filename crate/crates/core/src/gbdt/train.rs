use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::{leaf_weight, log_loss, logistic_grad_hess};
use super::split::{reduce_candidates, scan_feature, Direction, NodeStats};
use super::{columns_of, GbdtModel, GbdtParams, Tree, TreeNode, MODEL_FORMAT_VERSION};
use crate::features::FeatureMatrix;
use crate::stats::stratified_split;
use crate::{Error, Result};

/// Hold out part of the training rows and stop once validation loss has
/// not improved for `patience` rounds. The model keeps the best round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub validation_fraction: f64,
    pub patience: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainOptions {
    /// Worker threads; `None` uses the global pool. Results do not depend
    /// on this value.
    pub threads: Option<usize>,
    pub early_stopping: Option<EarlyStopping>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundStats {
    pub round: usize,
    /// Mean training log-loss after the round.
    pub train_loss: f64,
    /// Mean log-loss plus the penalty of the round's tree, per row.
    pub objective: f64,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GbdtModel,
    /// Final raw scores of the rows the model was fit on.
    pub train_raw_scores: Vec<f64>,
    /// Matrix rows used for fitting (all rows unless early stopping).
    pub train_rows: Vec<usize>,
    pub history: Vec<RoundStats>,
}

pub fn train(matrix: &FeatureMatrix, params: &GbdtParams) -> Result<GbdtModel> {
    Ok(train_with(matrix, params, &TrainOptions::default())?.model)
}

pub fn train_with(matrix: &FeatureMatrix, params: &GbdtParams, options: &TrainOptions) -> Result<TrainOutcome> {
    let run = || -> Result<TrainOutcome> {
        let columns = columns_of(matrix);
        let names = matrix.schema().names();
        let labels = matrix.labels();
        match options.early_stopping {
            None => {
                let (model, raw, history) = fit(&columns, labels, names, params, None)?;
                Ok(TrainOutcome {
                    model,
                    train_raw_scores: raw,
                    train_rows: (0..labels.len()).collect(),
                    history,
                })
            }
            Some(es) => {
                if !(es.validation_fraction > 0.0 && es.validation_fraction < 1.0) || es.patience == 0 {
                    return Err(Error::Config("early stopping needs a fraction in (0,1) and patience >= 1".into()));
                }
                let flags: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
                let (fit_rows, val_rows) = stratified_split(&flags, es.validation_fraction, params.rng_seed)?;
                let pick = |rows: &[usize]| -> (Vec<Vec<f64>>, Vec<u8>) {
                    (
                        columns.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect(),
                        rows.iter().map(|&r| labels[r]).collect(),
                    )
                };
                let (fit_cols, fit_labels) = pick(&fit_rows);
                let (val_cols, val_labels) = pick(&val_rows);
                let (model, raw, history) =
                    fit(&fit_cols, &fit_labels, names, params, Some((&val_cols, &val_labels, es.patience)))?;
                Ok(TrainOutcome {
                    model,
                    train_raw_scores: raw,
                    train_rows: fit_rows,
                    history,
                })
            }
        }
    };
    match options.threads {
        None => run(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run),
    }
}

/// Trains on column-major data where `NaN` marks a missing value.
pub fn train_columns(
    columns: &[Vec<f64>],
    labels: &[u8],
    feature_names: Vec<String>,
    params: &GbdtParams,
) -> Result<(GbdtModel, Vec<f64>, Vec<RoundStats>)> {
    fit(columns, labels, feature_names, params, None)
}

type Validation<'a> = (&'a [Vec<f64>], &'a [u8], usize);

fn fit(
    columns: &[Vec<f64>],
    labels: &[u8],
    feature_names: Vec<String>,
    params: &GbdtParams,
    validation: Option<Validation<'_>>,
) -> Result<(GbdtModel, Vec<f64>, Vec<RoundStats>)> {
    params.validate()?;
    let n = labels.len();
    if columns.len() != feature_names.len() || columns.iter().any(|c| c.len() != n) {
        return Err(Error::Consistency("column shapes do not match labels and names".into()));
    }
    if n < 2 {
        return Err(Error::Untrainable("need at least two rows".into()));
    }
    if u32::try_from(n).is_err() {
        return Err(Error::Untrainable("too many rows".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Untrainable("training labels contain a single class".into()));
    }
    let base_score = (pos as f64 / neg as f64).ln();

    // Present rows of each feature, ascending by value then row index.
    let presorted: Vec<Vec<u32>> = columns
        .par_iter()
        .map(|col| {
            let mut rows: Vec<u32> = (0..n as u32).filter(|&r| !col[r as usize].is_nan()).collect();
            rows.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            rows
        })
        .collect();

    let mut raw = vec![base_score; n];
    let mut val_raw: Option<Vec<f64>> = validation.map(|(_, l, _)| vec![base_score; l.len()]);
    let mut trees = Vec::with_capacity(params.num_rounds);
    let mut history = Vec::with_capacity(params.num_rounds);
    let mut best: Option<(usize, f64)> = None;
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for round in 0..params.num_rounds {
        grad.par_iter_mut()
            .zip(hess.par_iter_mut())
            .zip(raw.par_iter().zip(labels.par_iter()))
            .for_each(|((g, h), (&s, &y))| {
                let (gg, hh) = logistic_grad_hess(s, y);
                *g = gg;
                *h = hh;
            });

        let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed ^ round as u64);
        let in_sample: Vec<bool> = if params.subsample < 1.0 {
            let k = ((params.subsample * n as f64).round() as usize).clamp(1, n);
            let mut flags = vec![false; n];
            for r in index::sample(&mut rng, n, k) {
                flags[r] = true;
            }
            flags
        } else {
            vec![true; n]
        };
        let d = columns.len();
        let features: Vec<usize> = if params.colsample < 1.0 && d > 0 {
            let k = ((params.colsample * d as f64).round() as usize).clamp(1, d);
            let mut f = index::sample(&mut rng, d, k).into_vec();
            f.sort_unstable();
            f
        } else {
            (0..d).collect()
        };

        let rows: Vec<u32> = (0..n as u32).filter(|&r| in_sample[r as usize]).collect();
        let lists: Vec<Vec<u32>> = features
            .iter()
            .map(|&f| presorted[f].iter().copied().filter(|&r| in_sample[r as usize]).collect())
            .collect();
        let mut builder = TreeBuilder {
            columns,
            grad: &grad,
            hess: &hess,
            params,
            features: &features,
            nodes: Vec::new(),
            side: vec![false; n],
        };
        builder.grow(rows, lists, 0);
        let tree = Tree { nodes: builder.nodes };

        let mut row_buf = vec![0.0; d];
        for (r, s) in raw.iter_mut().enumerate() {
            for (c, col) in columns.iter().enumerate() {
                row_buf[c] = col[r];
            }
            *s += tree.predict_row(&row_buf);
        }
        let loss = raw.iter().zip(labels).map(|(&s, &y)| log_loss(s, y)).sum::<f64>();
        let penalty: f64 = tree
            .leaves()
            .map(|w| params.gamma + 0.5 * params.lambda * w * w)
            .sum();
        let validation_loss = match (validation, val_raw.as_mut()) {
            (Some((vcols, vlabels, _)), Some(vraw)) => {
                for (r, s) in vraw.iter_mut().enumerate() {
                    for (c, col) in vcols.iter().enumerate() {
                        row_buf[c] = col[r];
                    }
                    *s += tree.predict_row(&row_buf);
                }
                Some(vraw.iter().zip(vlabels).map(|(&s, &y)| log_loss(s, y)).sum::<f64>() / vlabels.len().max(1) as f64)
            }
            _ => None,
        };
        trees.push(tree);
        history.push(RoundStats {
            round,
            train_loss: loss / n as f64,
            objective: (loss + penalty) / n as f64,
            validation_loss,
        });

        if let (Some((_, _, patience)), Some(v)) = (validation, validation_loss) {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((round, v));
            } else if round - best.expect("set on first round").0 >= patience {
                break;
            }
        }
    }

    if let Some((best_round, _)) = best {
        trees.truncate(best_round + 1);
        history.truncate(best_round + 1);
        let d = columns.len();
        let mut row_buf = vec![0.0; d];
        for (r, s) in raw.iter_mut().enumerate() {
            for (c, col) in columns.iter().enumerate() {
                row_buf[c] = col[r];
            }
            *s = trees.iter().fold(base_score, |acc, t| acc + t.predict_row(&row_buf));
        }
    }

    let model = GbdtModel {
        version: MODEL_FORMAT_VERSION,
        base_score,
        params: params.clone(),
        feature_names,
        trees,
    };
    Ok((model, raw, history))
}

struct TreeBuilder<'a> {
    columns: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbdtParams,
    features: &'a [usize],
    nodes: Vec<TreeNode>,
    /// Scratch: `true` for rows of the node being split that go left.
    side: Vec<bool>,
}

impl TreeBuilder<'_> {
    /// Grows the subtree for `rows` (ascending) and returns its node id.
    /// `lists[k]` holds the present rows of `features[k]` in sorted order.
    fn grow(&mut self, rows: Vec<u32>, lists: Vec<Vec<u32>>, depth: usize) -> usize {
        let stats = rows.iter().fold(NodeStats::default(), |s, &r| NodeStats {
            g: s.g + self.grad[r as usize],
            h: s.h + self.hess[r as usize],
            n: s.n + 1,
        });
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { id, weight: 0.0 });

        let candidate = if depth < self.params.max_depth && rows.len() >= 2 {
            let (columns, grad, hess, params) = (self.columns, self.grad, self.hess, self.params);
            let found: Vec<_> = self
                .features
                .par_iter()
                .zip(lists.par_iter())
                .map(|(&f, list)| scan_feature(f, list, &columns[f], grad, hess, stats, params))
                .collect();
            reduce_candidates(found)
        } else {
            None
        };

        let Some(split) = candidate else {
            let w = leaf_weight(stats.g, stats.h, self.params.lambda).unwrap_or(0.0);
            self.nodes[id] = TreeNode::Leaf {
                id,
                weight: self.params.learning_rate * w,
            };
            return id;
        };

        let col = &self.columns[split.feature];
        for &r in &rows {
            let x = col[r as usize];
            self.side[r as usize] = if x.is_nan() {
                split.default_direction == Direction::Left
            } else {
                x < split.threshold
            };
        }
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows.iter().partition(|&&r| self.side[r as usize]);
        let side = &self.side;
        let (left_lists, right_lists): (Vec<Vec<u32>>, Vec<Vec<u32>>) = lists
            .into_iter()
            .map(|list| list.into_iter().partition(|&r| side[r as usize]))
            .unzip();

        let left = self.grow(left_rows, left_lists, depth + 1);
        let right = self.grow(right_rows, right_lists, depth + 1);
        self.nodes[id] = TreeNode::Split {
            id,
            feature: split.feature,
            threshold: split.threshold,
            default: split.default_direction,
            left,
            right,
        };
        id
    }
}
