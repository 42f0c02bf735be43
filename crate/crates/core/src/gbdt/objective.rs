use crate::{Error, Result};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// First and second derivative of the logistic loss with respect to the
/// raw score.
pub fn logistic_grad_hess(raw_score: f64, label: u8) -> (f64, f64) {
    let p = sigmoid(raw_score);
    (p - f64::from(label), p * (1.0 - p))
}

/// Logistic loss of one example, computed stably from the raw score.
pub fn log_loss(raw_score: f64, label: u8) -> f64 {
    // log(1 + e^x) - y x
    let softplus = if raw_score > 0.0 {
        raw_score + (-raw_score).exp().ln_1p()
    } else {
        raw_score.exp().ln_1p()
    };
    softplus - f64::from(label) * raw_score
}

/// Optimal leaf value `-G / (H + lambda)`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> Result<f64> {
    let denom = h + lambda;
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::Degenerate(format!("leaf with H + lambda = {denom}")));
    }
    Ok(-g / denom)
}

/// Structure-score improvement of splitting a node into the given children.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}
