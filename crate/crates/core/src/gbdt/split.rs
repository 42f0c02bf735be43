use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::split_gain;
use super::GbdtParams;

/// Side taken by rows whose split feature is missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub default_direction: Direction,
    pub gain: f64,
}

/// Gradient statistics of one node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct NodeStats {
    pub g: f64,
    pub h: f64,
    pub n: usize,
}

/// Best split of one feature, given the node's present rows in ascending
/// value order (ties by row index). Thresholds are midpoints of adjacent
/// distinct values; a row goes left iff its value is below the threshold.
/// Missing rows are tried on both sides, keeping right unless left is
/// strictly better. Among equal gains the lowest threshold wins.
pub(crate) fn scan_feature(
    feature: usize,
    sorted_rows: &[u32],
    column: &[f64],
    grad: &[f64],
    hess: &[f64],
    node: NodeStats,
    params: &GbdtParams,
) -> Option<SplitCandidate> {
    let mut present = NodeStats::default();
    for &r in sorted_rows {
        present.g += grad[r as usize];
        present.h += hess[r as usize];
    }
    let has_missing = sorted_rows.len() < node.n;
    let missing = NodeStats {
        g: node.g - present.g,
        h: node.h - present.h,
        n: node.n - sorted_rows.len(),
    };

    let gain_for = |gl: f64, hl: f64| -> Option<f64> {
        let (gr, hr) = (node.g - gl, node.h - hl);
        let ok = hl >= params.min_child_weight
            && hr >= params.min_child_weight
            && hl + params.lambda > 0.0
            && hr + params.lambda > 0.0;
        ok.then(|| split_gain(gl, hl, gr, hr, params.lambda, params.gamma))
    };

    let mut best: Option<SplitCandidate> = None;
    let (mut gl, mut hl) = (0.0, 0.0);
    for pair in sorted_rows.windows(2) {
        let (r, next_r) = (pair[0] as usize, pair[1] as usize);
        gl += grad[r];
        hl += hess[r];
        let (v, next) = (column[r], column[next_r]);
        if v == next {
            continue;
        }
        let right = gain_for(gl, hl);
        let left = if has_missing {
            gain_for(gl + missing.g, hl + missing.h)
        } else {
            None
        };
        let (gain, dir) = match (right, left) {
            (Some(r), Some(l)) if l > r => (l, Direction::Left),
            (Some(r), _) => (r, Direction::Right),
            (None, Some(l)) => (l, Direction::Left),
            (None, None) => continue,
        };
        if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
            best = Some(SplitCandidate {
                feature,
                threshold: midpoint(v, next),
                default_direction: dir,
                gain,
            });
        }
    }
    best
}

/// Split threshold between adjacent distinct values `lo < hi`. Always
/// satisfies `lo < t <= hi`, so `lo` goes left and `hi` goes right.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t > lo && t <= hi {
        t
    } else {
        hi
    }
}

/// Picks the best candidate across features: highest gain, then lowest
/// feature index (inputs are in ascending feature order).
pub(crate) fn reduce_candidates(candidates: impl IntoIterator<Item = Option<SplitCandidate>>) -> Option<SplitCandidate> {
    candidates.into_iter().flatten().fold(None, |best: Option<SplitCandidate>, c| match best {
        Some(b) if b.gain > c.gain || (b.gain == c.gain && b.feature < c.feature) => Some(b),
        _ => Some(c),
    })
}

/// Exact greedy search for the best split of the rows in `rows`.
///
/// `columns` is column-major with `NaN` marking missing cells. Returns
/// `None` when no candidate has positive gain while respecting
/// `min_child_weight`.
pub fn find_best_split(
    columns: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    features: &[usize],
    params: &GbdtParams,
) -> Option<SplitCandidate> {
    let node = rows.iter().fold(NodeStats::default(), |s, &r| NodeStats {
        g: s.g + grad[r],
        h: s.h + hess[r],
        n: s.n + 1,
    });
    let candidates: Vec<Option<SplitCandidate>> = features
        .par_iter()
        .map(|&f| {
            let col = &columns[f];
            let mut sorted: Vec<u32> = rows.iter().filter(|&&r| !col[r].is_nan()).map(|&r| r as u32).collect();
            sorted.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            scan_feature(f, &sorted, col, grad, hess, node, params)
        })
        .collect();
    reduce_candidates(candidates)
}
