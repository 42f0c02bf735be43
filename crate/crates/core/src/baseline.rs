//! FIB-4 and FIB-5 serum fibrosis indices and cutoff classification.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cohort::CohortAssignment;
use crate::ehr::{ClinicalRecordSet, ALBUMIN, ALP, ALT, AST, PLATELETS};
use crate::features::{age_at, ColumnKind, FeatureMatrix};
use crate::{Error, Result};

/// Usual FIB-4 rule-out cutoff: scores below it are low risk.
pub const FIB4_LOW_RISK_CUTOFF: f64 = 2.02;
/// Usual FIB-5 cutoff.
pub const FIB5_CUTOFF: f64 = -7.11;

/// Operating characteristics reported for the FIB-4 cutoff in another
/// population, quoted in report footnotes only.
pub const FIB4_REPORTED_SENS_SPEC: (f64, f64) = (0.468, 0.864);
/// Operating characteristics reported for the FIB-5 cutoff in another
/// population, quoted in report footnotes only.
pub const FIB5_REPORTED_SENS_SPEC: (f64, f64) = (0.818, 0.468);

/// Inputs to the serum indices, in conventional units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SerumPanel {
    pub age_years: f64,
    pub ast_u_per_l: f64,
    pub alt_u_per_l: f64,
    pub platelets_1e9_per_l: f64,
    pub albumin_g_per_dl: f64,
    pub alp_u_per_l: f64,
}

impl SerumPanel {
    /// Checks finiteness and the positivity constraints of the full panel.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("age", self.age_years, false),
            ("AST", self.ast_u_per_l, true),
            ("ALT", self.alt_u_per_l, true),
            ("platelets", self.platelets_1e9_per_l, true),
            ("albumin", self.albumin_g_per_dl, true),
            ("ALP", self.alp_u_per_l, true),
        ];
        for (name, v, strictly_positive) in fields {
            if !v.is_finite() || v < 0.0 || (strictly_positive && v == 0.0) {
                return Err(Error::Domain(format!("{name} = {v} out of range")));
            }
        }
        Ok(())
    }
}

/// FIB-5 linear coefficients. The score is
/// `albumin_g/L * albumin + platelets * platelets - (ALP * alp + AST/ALT * ast_alt_ratio + intercept)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fib5Coefficients {
    pub albumin: f64,
    pub platelets: f64,
    pub alp: f64,
    pub ast_alt_ratio: f64,
    pub intercept: f64,
}

impl Default for Fib5Coefficients {
    fn default() -> Self {
        Self {
            albumin: 0.3,
            platelets: 0.05,
            alp: 0.014,
            ast_alt_ratio: 6.0,
            intercept: 14.0,
        }
    }
}

/// Albumin is reported in g/dL; the FIB-5 coefficients expect g/L.
pub const ALBUMIN_G_PER_DL_TO_G_PER_L: f64 = 10.0;

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{name} is not finite")))
    }
}

/// `age * AST / (platelets * sqrt(ALT))`.
pub fn fib4(panel: &SerumPanel) -> Result<f64> {
    let age = finite("age", panel.age_years)?;
    let ast = finite("AST", panel.ast_u_per_l)?;
    let alt = finite("ALT", panel.alt_u_per_l)?;
    let plt = finite("platelets", panel.platelets_1e9_per_l)?;
    if alt <= 0.0 {
        return Err(Error::Domain(format!("ALT must be positive, got {alt}")));
    }
    if plt <= 0.0 {
        return Err(Error::Domain(format!("platelets must be positive, got {plt}")));
    }
    Ok(age * ast / (plt * alt.sqrt()))
}

pub fn fib5(panel: &SerumPanel) -> Result<f64> {
    fib5_with(panel, &Fib5Coefficients::default())
}

pub fn fib5_with(panel: &SerumPanel, c: &Fib5Coefficients) -> Result<f64> {
    let alt = finite("ALT", panel.alt_u_per_l)?;
    if alt <= 0.0 {
        return Err(Error::Domain(format!("ALT must be positive, got {alt}")));
    }
    let albumin_g_per_l = finite("albumin", panel.albumin_g_per_dl)? * ALBUMIN_G_PER_DL_TO_G_PER_L;
    let ratio = finite("AST", panel.ast_u_per_l)? / alt;
    let plt = finite("platelets", panel.platelets_1e9_per_l)?;
    let alp = finite("ALP", panel.alp_u_per_l)?;
    Ok((albumin_g_per_l * c.albumin + plt * c.platelets) - (alp * c.alp + ratio * c.ast_alt_ratio + c.intercept))
}

/// Which side of the cutoff counts as low risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffDirection {
    LtIsLowRisk,
    GtIsLowRisk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskClass {
    LowRisk,
    Elevated,
}

impl RiskClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RiskClass::LowRisk => "low_risk",
            RiskClass::Elevated => "elevated",
        }
    }
}

/// Strict comparison: a score equal to the cutoff is elevated.
pub fn classify_cutoff(score: f64, cutoff: f64, direction: CutoffDirection) -> RiskClass {
    let low = match direction {
        CutoffDirection::LtIsLowRisk => score < cutoff,
        CutoffDirection::GtIsLowRisk => score > cutoff,
    };
    if low {
        RiskClass::LowRisk
    } else {
        RiskClass::Elevated
    }
}

/// The two benchmark indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SerumIndex {
    Fib4,
    Fib5,
}

impl SerumIndex {
    pub fn name(self) -> &'static str {
        match self {
            SerumIndex::Fib4 => "fib4",
            SerumIndex::Fib5 => "fib5",
        }
    }

    pub fn score(self, panel: &SerumPanel) -> Result<f64> {
        match self {
            SerumIndex::Fib4 => fib4(panel),
            SerumIndex::Fib5 => fib5(panel),
        }
    }

    pub fn default_cutoff(self) -> f64 {
        match self {
            SerumIndex::Fib4 => FIB4_LOW_RISK_CUTOFF,
            SerumIndex::Fib5 => FIB5_CUTOFF,
        }
    }

    /// FIB-4 rises with fibrosis; FIB-5 falls with it.
    pub fn default_direction(self) -> CutoffDirection {
        match self {
            SerumIndex::Fib4 => CutoffDirection::LtIsLowRisk,
            SerumIndex::Fib5 => CutoffDirection::GtIsLowRisk,
        }
    }

    /// Score oriented so that larger means higher risk, for ROC analysis.
    pub fn risk_oriented(self, score: f64) -> f64 {
        match self.default_direction() {
            CutoffDirection::LtIsLowRisk => score,
            CutoffDirection::GtIsLowRisk => -score,
        }
    }
}

fn matrix_panels(matrix: &FeatureMatrix, with_fib5_inputs: bool) -> Result<Vec<SerumPanel>> {
    let schema = matrix.schema();
    let age = schema.require(&ColumnKind::Age)?;
    let ast = schema.require(&ColumnKind::Lab(AST.loinc))?;
    let alt = schema.require(&ColumnKind::Lab(ALT.loinc))?;
    let plt = schema.require(&ColumnKind::Lab(PLATELETS.loinc))?;
    let (alb, alp) = if with_fib5_inputs {
        (
            Some(schema.require(&ColumnKind::Lab(ALBUMIN.loinc))?),
            Some(schema.require(&ColumnKind::Lab(ALP.loinc))?),
        )
    } else {
        (None, None)
    };
    (0..matrix.n_rows())
        .map(|r| {
            let cell = |c: usize| {
                matrix.get(r, c).ok_or_else(|| {
                    Error::Schema(format!(
                        "patient {}: {} missing",
                        matrix.patient_ids()[r],
                        schema.columns()[c].name()
                    ))
                })
            };
            let opt = |c: Option<usize>| c.map_or(Ok(f64::NAN), cell);
            Ok(SerumPanel {
                age_years: cell(age)?,
                ast_u_per_l: cell(ast)?,
                alt_u_per_l: cell(alt)?,
                platelets_1e9_per_l: cell(plt)?,
                albumin_g_per_dl: opt(alb)?,
                alp_u_per_l: opt(alp)?,
            })
        })
        .collect()
}

fn with_row_id<T>(matrix: &FeatureMatrix, r: usize, res: Result<T>) -> Result<T> {
    res.map_err(|e| match e {
        Error::Domain(why) => Error::Domain(format!("patient {}: {why}", matrix.patient_ids()[r])),
        other => other,
    })
}

/// FIB-4 for every row, from window-mean labs and age at prediction.
pub fn fib4_for_cohort(matrix: &FeatureMatrix) -> Result<Vec<f64>> {
    let panels = matrix_panels(matrix, false)?;
    panels.iter().enumerate().map(|(r, p)| with_row_id(matrix, r, fib4(p))).collect()
}

/// FIB-5 for every row, from window-mean labs.
pub fn fib5_for_cohort(matrix: &FeatureMatrix) -> Result<Vec<f64>> {
    let panels = matrix_panels(matrix, true)?;
    panels.iter().enumerate().map(|(r, p)| with_row_id(matrix, r, fib5(p))).collect()
}

/// How per-patient lab values are reduced before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabAggregation {
    #[default]
    Mean,
    Last,
}

/// Serum panel of one member from the raw records, using the latest value
/// on or before the prediction point (`Last`) or the window mean (`Mean`).
pub fn panel_from_records(
    records: &ClinicalRecordSet,
    member: &CohortAssignment,
    aggregation: LabAggregation,
) -> Result<SerumPanel> {
    let pp = member.prediction_point;
    let patient = records
        .patient(&member.patient_id)
        .ok_or_else(|| Error::Consistency(format!("member {} not in record set", member.patient_id)))?;
    let ev = records.events(&member.patient_id);
    let pick = |loinc: &str| -> Result<f64> {
        let values: Vec<f64> = ev
            .labs
            .iter()
            .filter(|l| l.loinc == loinc && l.date <= pp)
            .map(|l| l.value)
            .collect();
        let v = match aggregation {
            LabAggregation::Mean if !values.is_empty() => Some(values.iter().sum::<f64>() / values.len() as f64),
            // labs are date-sorted with value tie-break, so the last element is the latest
            LabAggregation::Last => values.last().copied(),
            LabAggregation::Mean => None,
        };
        v.ok_or_else(|| Error::Schema(format!("patient {}: no {loinc} in window", member.patient_id)))
    };
    Ok(SerumPanel {
        age_years: f64::from(age_at(pp, patient.birth_date)?),
        ast_u_per_l: pick(AST.loinc)?,
        alt_u_per_l: pick(ALT.loinc)?,
        platelets_1e9_per_l: pick(PLATELETS.loinc)?,
        albumin_g_per_dl: pick(ALBUMIN.loinc)?,
        alp_u_per_l: pick(ALP.loinc)?,
    })
}

/// One row of a standalone scoring input file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ScoreInputRow {
    pub patient_id: String,
    pub age_years: f64,
    pub ast_u_per_l: f64,
    pub alt_u_per_l: f64,
    pub platelets_1e9_per_l: f64,
    #[serde(default = "nan")]
    pub albumin_g_per_dl: f64,
    #[serde(default = "nan")]
    pub alp_u_per_l: f64,
}

fn nan() -> f64 {
    f64::NAN
}

impl ScoreInputRow {
    pub fn panel(&self) -> SerumPanel {
        SerumPanel {
            age_years: self.age_years,
            ast_u_per_l: self.ast_u_per_l,
            alt_u_per_l: self.alt_u_per_l,
            platelets_1e9_per_l: self.platelets_1e9_per_l,
            albumin_g_per_dl: self.albumin_g_per_dl,
            alp_u_per_l: self.alp_u_per_l,
        }
    }
}

/// Reads `patient_id,age_years,ast_u_per_l,alt_u_per_l,platelets_1e9_per_l`
/// plus optional `albumin_g_per_dl,alp_u_per_l` columns.
pub fn read_score_input(path: &Path) -> Result<Vec<ScoreInputRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
