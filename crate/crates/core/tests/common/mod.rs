//! Independent reference implementations shared by the integration tests.
//! None of them call into the code they check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mann-Whitney concordance by enumerating every positive/negative pair.
pub fn concordance(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// A random scored sample with both classes present; at least 30% of the
/// scores repeat an earlier score.
pub fn tied_instance(r: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    let n = r.gen_range(2..=200);
    let mut labels: Vec<bool> = (0..n).map(|_| r.gen_bool(0.4)).collect();
    labels[0] = true;
    labels[1] = false;
    let mut scores: Vec<f64> = Vec::with_capacity(n);
    let ties = (0.3 * n as f64).ceil() as usize;
    for i in 0..n {
        if i >= n - ties && i > 0 {
            let k = r.gen_range(0..i);
            scores.push(scores[k]);
        } else {
            scores.push((r.gen_range(0..40) as f64) / 4.0);
        }
    }
    (scores, labels)
}

/// Best split by exhaustive enumeration.
///
/// For every feature and every pair of adjacent distinct present values,
/// rows strictly below the midpoint go left. Missing rows are placed on each
/// side in turn; the left placement is taken only when strictly better.
/// Ties between candidates resolve to the lowest feature, then the lowest
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSplit {
    pub feature: usize,
    pub threshold: f64,
    pub missing_left: bool,
    pub gain: f64,
}

pub fn brute_force_split(
    columns: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    lambda: f64,
    gamma: f64,
    min_child_weight: f64,
) -> Option<OracleSplit> {
    let total_g: f64 = rows.iter().map(|&r| grad[r]).sum();
    let total_h: f64 = rows.iter().map(|&r| hess[r]).sum();
    let score = |g: f64, h: f64| g * g / (h + lambda);
    let mut all: Vec<OracleSplit> = Vec::new();
    for (f, col) in columns.iter().enumerate() {
        let mut values: Vec<f64> = rows.iter().map(|&r| col[r]).filter(|v| !v.is_nan()).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let side = |missing_left: bool| {
                let (mut gl, mut hl) = (0.0, 0.0);
                for &r in rows {
                    let v = col[r];
                    let left = if v.is_nan() { missing_left } else { v < t };
                    if left {
                        gl += grad[r];
                        hl += hess[r];
                    }
                }
                let (gr, hr) = (total_g - gl, total_h - hl);
                let ok = hl >= min_child_weight && hr >= min_child_weight && hl + lambda > 0.0 && hr + lambda > 0.0;
                ok.then(|| 0.5 * (score(gl, hl) + score(gr, hr) - score(total_g, total_h)) - gamma)
            };
            let has_missing = rows.iter().any(|&r| col[r].is_nan());
            let right = side(false);
            let left = if has_missing { side(true) } else { None };
            let pick = match (right, left) {
                (Some(r), Some(l)) if l > r => Some((l, true)),
                (Some(r), _) => Some((r, false)),
                (None, Some(l)) => Some((l, true)),
                (None, None) => None,
            };
            if let Some((gain, missing_left)) = pick {
                if gain > 0.0 {
                    all.push(OracleSplit {
                        feature: f,
                        threshold: t,
                        missing_left,
                        gain,
                    });
                }
            }
        }
    }
    let best = all.iter().map(|c| c.gain).fold(f64::NEG_INFINITY, f64::max);
    all.into_iter().filter(|c| c.gain == best).min_by(|a, b| {
        a.feature
            .cmp(&b.feature)
            .then(a.threshold.partial_cmp(&b.threshold).unwrap())
    })
}

/// One row of the shipped Charlson table.
#[derive(Debug, Clone)]
pub struct CharlsonRow {
    pub version: u8,
    pub prefix: String,
    pub category: String,
    pub weight: u32,
    pub supersedes: Option<String>,
}

pub fn parse_charlson(text: &str) -> Vec<CharlsonRow> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            CharlsonRow {
                version: f[0].parse().unwrap(),
                prefix: f[1].to_string(),
                category: f[2].to_string(),
                weight: f[3].parse().unwrap(),
                supersedes: f.get(4).filter(|s| !s.is_empty()).map(|s| s.to_string()),
            }
        })
        .collect()
}

/// Charlson score by scanning every table row against every code, then
/// dropping categories outranked by a present category.
pub fn brute_force_cci(table: &[CharlsonRow], codes: &[(u8, String)]) -> u32 {
    let mut present: BTreeSet<&str> = BTreeSet::new();
    for row in table {
        if codes.iter().any(|(v, c)| *v == row.version && c.starts_with(&row.prefix)) {
            present.insert(&row.category);
        }
    }
    let weight: HashMap<&str, u32> = table.iter().map(|r| (r.category.as_str(), r.weight)).collect();
    let silenced: BTreeSet<&str> = table
        .iter()
        .filter(|r| present.contains(r.category.as_str()))
        .filter_map(|r| r.supersedes.as_deref())
        .collect();
    present.iter().filter(|c| !silenced.contains(*c)).map(|c| weight[c]).sum()
}

fn read_rows(path: &Path) -> Vec<HashMap<String, String>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            headers.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect()
        })
        .collect()
}

fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

#[derive(Debug, Default)]
pub struct MatchingAudit {
    pub cases: usize,
    pub controls: usize,
    pub max_controls_per_anchor: usize,
}

/// Verifies the matching contract from `cohort.csv` and `encounters.csv`
/// alone: every control has an encounter on its prediction point within
/// `tolerance` days of its anchor case's prediction point, no anchor has
/// more than `per_case` controls, and no patient appears twice.
pub fn audit_matching(cohort_csv: &Path, encounters_csv: &Path, tolerance: i64, per_case: usize) -> Result<MatchingAudit, String> {
    let cohort = read_rows(cohort_csv);
    let mut visits: HashMap<String, BTreeSet<NaiveDate>> = HashMap::new();
    for e in read_rows(encounters_csv) {
        visits.entry(e["patient_id"].clone()).or_default().insert(date(&e["date"]));
    }
    let mut seen = BTreeSet::new();
    let mut case_pp: HashMap<String, NaiveDate> = HashMap::new();
    for m in &cohort {
        if !seen.insert(m["patient_id"].clone()) {
            return Err(format!("patient {} listed twice", m["patient_id"]));
        }
        if m["label"] == "case" {
            case_pp.insert(m["patient_id"].clone(), date(&m["prediction_point"]));
        }
    }
    let mut per_anchor: BTreeMap<String, usize> = BTreeMap::new();
    let mut audit = MatchingAudit {
        cases: case_pp.len(),
        ..MatchingAudit::default()
    };
    for m in cohort.iter().filter(|m| m["label"] == "control") {
        audit.controls += 1;
        let id = &m["patient_id"];
        let pp = date(&m["prediction_point"]);
        let anchor = &m["anchor_patient_id"];
        if anchor.is_empty() {
            return Err(format!("control {id} has no anchor"));
        }
        let anchor_pp = date(&m["anchor_prediction_point"]);
        if let Some(&recorded) = case_pp.get(anchor) {
            if recorded != anchor_pp {
                return Err(format!("control {id}: anchor date disagrees with case {anchor}"));
            }
        }
        if case_pp.contains_key(id) {
            return Err(format!("control {id} is also a case"));
        }
        if !visits.get(id).is_some_and(|v| v.contains(&pp)) {
            return Err(format!("control {id} has no encounter on {pp}"));
        }
        let gap = (pp - anchor_pp).num_days().abs();
        if gap > tolerance {
            return Err(format!("control {id} is {gap} days from its anchor"));
        }
        *per_anchor.entry(anchor.clone()).or_default() += 1;
    }
    audit.max_controls_per_anchor = per_anchor.values().copied().max().unwrap_or(0);
    if audit.max_controls_per_anchor > per_case {
        return Err(format!("an anchor has {} controls", audit.max_controls_per_anchor));
    }
    Ok(audit)
}
pub mod checks;
