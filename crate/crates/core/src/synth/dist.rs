//! Marginal distributions used by the generator, parameterized by their
//! target mean and standard deviation.

use serde::{Deserialize, Serialize};

use crate::stats::special::{normal_cdf, normal_pdf, normal_quantile};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// Normal truncated below at zero (and optionally above), with location
    /// and scale solved so the truncated moments hit the targets.
    TruncatedNormal,
    /// Lognormal with the target mean and standard deviation.
    Lognormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSpec {
    pub mean: f64,
    pub sd: f64,
    pub distribution: Distribution,
    /// Optional support bounds; the lower bound defaults to 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

impl ContinuousSpec {
    pub fn truncated_normal(mean: f64, sd: f64) -> Self {
        Self {
            mean,
            sd,
            distribution: Distribution::TruncatedNormal,
            lower: None,
            upper: None,
        }
    }

    pub fn lognormal(mean: f64, sd: f64) -> Self {
        Self {
            mean,
            sd,
            distribution: Distribution::Lognormal,
            lower: None,
            upper: None,
        }
    }

    /// Confines draws to `(lower, upper)`, shrinking the standard deviation to
    /// at most a third of the distance from the mean to the nearer bound.
    pub fn capped(mean: f64, sd: f64, lower: f64, upper: f64) -> Self {
        let room = (mean - lower).min(upper - mean);
        Self {
            mean,
            sd: sd.min(room / 3.0),
            distribution: Distribution::TruncatedNormal,
            lower: Some(lower),
            upper: Some(upper),
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |why: &str| Err(Error::Config(format!("{name}: {why}")));
        if !self.mean.is_finite() || !self.sd.is_finite() || self.sd < 0.0 {
            return bad("mean must be finite and sd >= 0");
        }
        let lo = self.lower.unwrap_or(0.0);
        let hi = self.upper.unwrap_or(f64::INFINITY);
        if !(lo < self.mean && self.mean < hi) {
            return bad("mean must lie strictly inside the support");
        }
        Sampler::new(self).map(|_| ()).map_err(|e| Error::Config(format!("{name}: {e}")))
    }
}

/// Inverse-CDF sampler for a [`ContinuousSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler {
    Constant(f64),
    Truncated { mu: f64, sigma: f64, lo: f64, hi: f64, p_lo: f64, p_hi: f64 },
    Lognormal { mu: f64, sigma: f64 },
}

impl Sampler {
    pub fn new(spec: &ContinuousSpec) -> Result<Self> {
        if spec.sd == 0.0 {
            return Ok(Sampler::Constant(spec.mean));
        }
        match spec.distribution {
            Distribution::Lognormal => {
                if spec.lower.is_some() || spec.upper.is_some() {
                    return Err(Error::Config("bounds are only supported for truncated normals".into()));
                }
                let s2 = (1.0 + (spec.sd / spec.mean).powi(2)).ln();
                Ok(Sampler::Lognormal {
                    mu: spec.mean.ln() - s2 / 2.0,
                    sigma: s2.sqrt(),
                })
            }
            Distribution::TruncatedNormal => {
                let lo = spec.lower.unwrap_or(0.0);
                let hi = spec.upper.unwrap_or(f64::INFINITY);
                let (mu, sigma) = solve_truncated(spec.mean, spec.sd, lo, hi)?;
                Ok(Sampler::Truncated {
                    mu,
                    sigma,
                    lo,
                    hi,
                    p_lo: normal_cdf((lo - mu) / sigma),
                    p_hi: if hi.is_finite() { normal_cdf((hi - mu) / sigma) } else { 1.0 },
                })
            }
        }
    }

    /// Maps `u` in (0, 1) to a draw.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Sampler::Constant(v) => v,
            Sampler::Lognormal { mu, sigma } => (mu + sigma * normal_quantile(u)).exp(),
            Sampler::Truncated {
                mu,
                sigma,
                lo,
                hi,
                p_lo,
                p_hi,
            } => {
                let p = (p_lo + u * (p_hi - p_lo)).clamp(1e-300, 1.0 - 1e-16);
                (mu + sigma * normal_quantile(p)).clamp(lo, hi)
            }
        }
    }
}

/// Mean and standard deviation of N(mu, sigma^2) restricted to [lo, hi].
pub fn truncated_moments(mu: f64, sigma: f64, lo: f64, hi: f64) -> (f64, f64) {
    let a = (lo - mu) / sigma;
    let b = (hi - mu) / sigma;
    let (pa, pb) = (normal_pdf(a), if b.is_finite() { normal_pdf(b) } else { 0.0 });
    let z = if b.is_finite() { normal_cdf(b) } else { 1.0 } - normal_cdf(a);
    let bpb = if b.is_finite() { b * pb } else { 0.0 };
    let ratio = (pa - pb) / z;
    let mean = mu + sigma * ratio;
    let var = sigma * sigma * (1.0 + (a * pa - bpb) / z - ratio * ratio);
    (mean, var.max(0.0).sqrt())
}

/// Finds the parent normal whose truncation to [lo, hi] has the requested
/// mean and standard deviation.
fn solve_truncated(mean: f64, sd: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let (mut mu, mut sigma) = (mean, sd);
    for _ in 0..10_000 {
        let (m, s) = truncated_moments(mu, sigma, lo, hi);
        if !(m.is_finite() && s.is_finite() && s > 0.0) {
            break;
        }
        let (dm, ds) = (mean - m, sd / s);
        if dm.abs() <= 1e-12 * mean.abs().max(1.0) && (ds - 1.0).abs() <= 1e-12 {
            return Ok((mu, sigma));
        }
        mu += dm;
        sigma *= ds;
        if sigma > 1e6 * sd.max(1e-12) || mu < lo - 1e3 * sd {
            break;
        }
    }
    Err(Error::Config(format!(
        "no truncated normal on [{lo}, {hi}] has mean {mean} and sd {sd}; use a lognormal"
    )))
}
