//! Descriptive cohort table with group comparisons.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{chi_square_p, mean_var, welch_t_p};
use crate::cohort::CohortAssignment;
use crate::features::{CategoricalGroup, ColumnKind, FeatureMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl GroupSummary {
    fn of(xs: &[f64]) -> Self {
        let (mean, var) = mean_var(xs);
        Self {
            n: xs.len(),
            mean,
            sd: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelCounts {
    pub level: String,
    pub overall: u64,
    pub controls: u64,
    pub cases: u64,
}

/// A p-value, or the reason no test could be run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TestOutcome {
    P(f64),
    Degenerate(String),
}

impl TestOutcome {
    pub fn p(&self) -> Option<f64> {
        match self {
            TestOutcome::P(p) => Some(*p),
            TestOutcome::Degenerate(_) => None,
        }
    }

    fn render(&self) -> String {
        match self {
            TestOutcome::P(p) if *p < 0.001 => "<0.001".into(),
            TestOutcome::P(p) => format!("{p:.3}"),
            TestOutcome::Degenerate(why) => format!("n/a ({why})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CharacteristicsRow {
    Counts {
        overall: u64,
        controls: u64,
        cases: u64,
    },
    Categorical {
        variable: String,
        levels: Vec<LevelCounts>,
        test: TestOutcome,
    },
    Continuous {
        variable: String,
        overall: GroupSummary,
        controls: GroupSummary,
        cases: GroupSummary,
        test: TestOutcome,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacteristicsTable {
    pub rows: Vec<CharacteristicsRow>,
}

impl CharacteristicsTable {
    pub fn continuous(&self, variable: &str) -> Option<(&GroupSummary, &GroupSummary, &TestOutcome)> {
        self.rows.iter().find_map(|r| match r {
            CharacteristicsRow::Continuous {
                variable: v,
                controls,
                cases,
                test,
                ..
            } if v == variable => Some((controls, cases, test)),
            _ => None,
        })
    }

    pub fn categorical(&self, variable: &str) -> Option<(&[LevelCounts], &TestOutcome)> {
        self.rows.iter().find_map(|r| match r {
            CharacteristicsRow::Categorical { variable: v, levels, test } if v == variable => {
                Some((levels.as_slice(), test))
            }
            _ => None,
        })
    }

    /// `variable,level,overall,controls,cases,p_value`, one line per level
    /// or continuous variable.
    pub fn write_csv(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        if let Some(c) = comment {
            writeln!(file, "# {c}").map_err(|e| Error::io(path, e))?;
        }
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["variable", "level", "overall", "controls", "cases", "p_value"])?;
        let ms = |g: &GroupSummary| format!("{:.1} ({:.1})", g.mean, g.sd);
        for row in &self.rows {
            match row {
                CharacteristicsRow::Counts {
                    overall,
                    controls,
                    cases,
                } => w.write_record([
                    "Patient Counts".to_string(),
                    String::new(),
                    overall.to_string(),
                    controls.to_string(),
                    cases.to_string(),
                    String::new(),
                ])?,
                CharacteristicsRow::Categorical { variable, levels, test } => {
                    w.write_record([variable.as_str(), "", "", "", "", &test.render()])?;
                    for l in levels {
                        w.write_record([
                            variable.clone(),
                            l.level.clone(),
                            l.overall.to_string(),
                            l.controls.to_string(),
                            l.cases.to_string(),
                            String::new(),
                        ])?;
                    }
                }
                CharacteristicsRow::Continuous {
                    variable,
                    overall,
                    controls,
                    cases,
                    test,
                } => w.write_record([
                    variable.clone(),
                    "mean (SD)".to_string(),
                    ms(overall),
                    ms(controls),
                    ms(cases),
                    test.render(),
                ])?,
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Counts per categorical level and mean (SD) per continuous variable,
/// split by label. Categorical groups are compared with Pearson
/// chi-square over the levels that occur; continuous variables with Welch's
/// t-test. A comparison that cannot be computed is reported as degenerate.
pub fn characteristics_table(matrix: &FeatureMatrix, cohort: &[CohortAssignment]) -> Result<CharacteristicsTable> {
    if matrix.n_rows() != cohort.len()
        || matrix
            .patient_ids()
            .iter()
            .zip(cohort)
            .zip(matrix.labels())
            .any(|((id, m), &l)| *id != m.patient_id || (l == 1) != m.label.is_case())
    {
        return Err(Error::Consistency("feature rows do not align with cohort members".into()));
    }
    let labels = matrix.labels();
    let n_cases = labels.iter().filter(|&&l| l == 1).count() as u64;
    let n_controls = labels.len() as u64 - n_cases;
    if n_cases == 0 || n_controls == 0 {
        return Err(Error::Degenerate("characteristics table needs both cases and controls".into()));
    }
    let mut rows = vec![CharacteristicsRow::Counts {
        overall: n_cases + n_controls,
        controls: n_controls,
        cases: n_cases,
    }];

    let schema = matrix.schema();
    for (group, range) in schema.one_hot_groups() {
        let levels: Vec<LevelCounts> = range
            .map(|c| {
                let level = match &schema.columns()[c] {
                    ColumnKind::OneHot(_, level) => group.level_label(level),
                    _ => unreachable!("one-hot range"),
                };
                let (mut controls, mut cases) = (0, 0);
                for (r, &label) in labels.iter().enumerate() {
                    if matrix.get(r, c) == Some(1.0) {
                        if label == 1 {
                            cases += 1;
                        } else {
                            controls += 1;
                        }
                    }
                }
                LevelCounts {
                    level,
                    overall: controls + cases,
                    controls,
                    cases,
                }
            })
            .filter(|l| l.overall > 0)
            .collect();
        let test = categorical_test(&levels);
        rows.push(CharacteristicsRow::Categorical {
            variable: group_title(group),
            levels,
            test,
        });
    }

    for (c, kind) in schema.columns().iter().enumerate() {
        if !kind.is_continuous() {
            continue;
        }
        let (mut all, mut ctl, mut cas) = (Vec::new(), Vec::new(), Vec::new());
        for (r, &label) in labels.iter().enumerate() {
            if let Some(v) = matrix.get(r, c) {
                all.push(v);
                if label == 1 {
                    cas.push(v)
                } else {
                    ctl.push(v)
                }
            }
        }
        let test = match welch_t_p(&ctl, &cas) {
            Ok(w) => TestOutcome::P(w.p),
            Err(e) => TestOutcome::Degenerate(short_reason(&e)),
        };
        rows.push(CharacteristicsRow::Continuous {
            variable: kind.display(),
            overall: GroupSummary::of(&all),
            controls: GroupSummary::of(&ctl),
            cases: GroupSummary::of(&cas),
            test,
        });
    }
    Ok(CharacteristicsTable { rows })
}

fn group_title(group: CategoricalGroup) -> String {
    group.title().to_string()
}

fn categorical_test(levels: &[LevelCounts]) -> TestOutcome {
    if levels.len() < 2 {
        return TestOutcome::Degenerate("single level".into());
    }
    let table: Vec<Vec<u64>> = levels.iter().map(|l| vec![l.controls, l.cases]).collect();
    match chi_square_p(&table) {
        Ok(chi) => TestOutcome::P(chi.p),
        Err(e) => TestOutcome::Degenerate(short_reason(&e)),
    }
}

fn short_reason(e: &Error) -> String {
    match e {
        Error::Degenerate(why) => why.clone(),
        other => other.to_string(),
    }
}
