use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// An empirical ROC curve from (0,0) to (1,1) and its area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    /// `(fpr, tpr)` pairs, both coordinates non-decreasing.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

fn class_counts(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Schema(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Domain(format!("score {i} is not finite")));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate("AUC is undefined with a single class".into()));
    }
    Ok((n_pos, n_neg))
}

/// ROC curve by a descending-score sweep. Equal scores form one diagonal step,
/// which makes the trapezoidal area equal to the Mann–Whitney statistic with
/// half credit for ties.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocResult> {
    let (n_pos, n_neg) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = Vec::with_capacity(order.len() + 1);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area, in units of 1 / (n_pos * n_neg)
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp_prev, fp_prev) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += u128::from(fp - fp_prev) * u128::from(tp + tp_prev);
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    let auc = area2 as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(RocResult {
        points,
        auc,
        n_pos,
        n_neg,
    })
}

/// Trapezoidal area under an arbitrary polyline of `(fpr, tpr)` points.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Sensitivity and specificity at a strict threshold. With
/// `high_is_positive`, a score strictly above `cutoff` is called positive;
/// otherwise a score strictly below it is.
pub fn sens_spec_at(scores: &[f64], labels: &[bool], cutoff: f64, high_is_positive: bool) -> Result<(f64, f64)> {
    let (n_pos, n_neg) = class_counts(scores, labels)?;
    let (mut tp, mut tn) = (0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        let called = if high_is_positive { s > cutoff } else { s < cutoff };
        match (called, l) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            _ => {}
        }
    }
    Ok((tp as f64 / n_pos as f64, tn as f64 / n_neg as f64))
}
