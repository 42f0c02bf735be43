use serde::{Deserialize, Serialize};

use super::special::{chi_square_sf, student_t_two_sided};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: f64,
    pub p: f64,
}

/// Pearson chi-square test of independence, no continuity correction.
pub fn chi_square_p(table: &[Vec<u64>]) -> Result<ChiSquare> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows < 2 || cols < 2 {
        return Err(Error::Degenerate(format!("{rows}x{cols} contingency table")));
    }
    if table.iter().any(|r| r.len() != cols) {
        return Err(Error::Schema("ragged contingency table".into()));
    }
    let row_tot: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_tot: Vec<f64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64).collect();
    if row_tot.iter().chain(&col_tot).any(|&t| t == 0.0) {
        return Err(Error::Degenerate("contingency table has a zero marginal".into()));
    }
    let total: f64 = row_tot.iter().sum();
    let mut statistic = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = row_tot[i] * col_tot[j] / total;
            statistic += (o as f64 - e).powi(2) / e;
        }
    }
    let df = ((rows - 1) * (cols - 1)) as f64;
    Ok(ChiSquare {
        statistic,
        df,
        p: chi_square_sf(statistic, df).clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchT {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Welch's unequal-variance two-sample t-test, two-sided, Satterthwaite df.
pub fn welch_t_p(a: &[f64], b: &[f64]) -> Result<WelchT> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Degenerate("Welch test needs at least two observations per group".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    if sa + sb == 0.0 {
        return Err(Error::Degenerate("both groups have zero variance".into()));
    }
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    Ok(WelchT {
        t,
        df,
        p: student_t_two_sided(t, df).clamp(0.0, 1.0),
    })
}
