//! Observation-window aggregation into a fixed-order feature matrix.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::ops::Range;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{CohortAssignment, Label};
use crate::ehr::{lab_by_loinc, ClinicalRecordSet, DiagnosisEvent, Gender, VitalKind, LAB_PANEL};
use crate::terminology::{CcsMap, CharlsonMap, RuccClass, Terminology};
use crate::{Error, Result};

/// Race levels in one-hot order; anything else encodes as `Unknown`.
pub const RACE_LEVELS: [&str; 7] = ["Asian", "Black", "Decline", "Hispanic", "Multiple", "Native American", "White"];

/// Marital-status levels in one-hot order; anything else encodes as `Unknown`.
pub const MARITAL_LEVELS: [&str; 6] = ["Divorced", "Life Partner", "Married", "Separated", "Single", "Widowed"];

pub const UNKNOWN: &str = "Unknown";

/// Categorical variables encoded one-hot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CategoricalGroup {
    Gender,
    Race,
    MaritalStatus,
    Rucc,
}

impl CategoricalGroup {
    pub const ALL: [CategoricalGroup; 4] = [
        CategoricalGroup::Gender,
        CategoricalGroup::Race,
        CategoricalGroup::MaritalStatus,
        CategoricalGroup::Rucc,
    ];

    pub fn key(self) -> &'static str {
        match self {
            CategoricalGroup::Gender => "gender",
            CategoricalGroup::Race => "race",
            CategoricalGroup::MaritalStatus => "marital_status",
            CategoricalGroup::Rucc => "rucc",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            CategoricalGroup::Gender => "Gender",
            CategoricalGroup::Race => "Race",
            CategoricalGroup::MaritalStatus => "Marital Status",
            CategoricalGroup::Rucc => "Rural-Urban Status",
        }
    }

    /// Column-level keys in encoding order, `Unknown` last.
    pub fn levels(self) -> Vec<String> {
        let mut out: Vec<String> = match self {
            CategoricalGroup::Gender => Gender::ALL[..2].iter().map(|g| g.as_str().to_string()).collect(),
            CategoricalGroup::Race => RACE_LEVELS.iter().map(|s| s.to_string()).collect(),
            CategoricalGroup::MaritalStatus => MARITAL_LEVELS.iter().map(|s| s.to_string()).collect(),
            CategoricalGroup::Rucc => (1..=9).map(|c: u8| c.to_string()).collect(),
        };
        out.push(UNKNOWN.to_string());
        out
    }

    /// Human-readable level name for reports.
    pub fn level_label(self, level: &str) -> String {
        match (self, level.parse::<u8>()) {
            (CategoricalGroup::Rucc, Ok(code)) => RuccClass::Code(code).label().to_string(),
            _ => level.to_string(),
        }
    }

    fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.key() == key)
    }
}

/// Meaning of one feature column.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ColumnKind {
    Age,
    CciMean,
    Vital(VitalKind),
    Lab(&'static str),
    OneHot(CategoricalGroup, String),
    Ccs(u32),
}

impl ColumnKind {
    pub fn name(&self) -> String {
        match self {
            ColumnKind::Age => "age_at_prediction".into(),
            ColumnKind::CciMean => "cci_mean".into(),
            ColumnKind::Vital(kind) => format!("vital_{}", kind.as_str()),
            ColumnKind::Lab(loinc) => format!("lab_{loinc}"),
            ColumnKind::OneHot(group, level) => format!("{}={level}", group.key()),
            ColumnKind::Ccs(id) => format!("ccs_{id}"),
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "age_at_prediction" => return Some(ColumnKind::Age),
            "cci_mean" => return Some(ColumnKind::CciMean),
            _ => {}
        }
        if let Some(kind) = name.strip_prefix("vital_") {
            return VitalKind::parse(kind).map(ColumnKind::Vital);
        }
        if let Some(loinc) = name.strip_prefix("lab_") {
            return lab_by_loinc(loinc).map(|a| ColumnKind::Lab(a.loinc));
        }
        if let Some(id) = name.strip_prefix("ccs_") {
            return id.parse().ok().filter(|&id| id >= 1).map(ColumnKind::Ccs);
        }
        let (group, level) = name.split_once('=')?;
        let group = CategoricalGroup::from_key(group)?;
        group
            .levels()
            .contains(&level.to_string())
            .then(|| ColumnKind::OneHot(group, level.to_string()))
    }

    /// Display label used in descriptive tables.
    pub fn display(&self) -> String {
        match self {
            ColumnKind::Age => "Age".into(),
            ColumnKind::CciMean => "CCI".into(),
            ColumnKind::Vital(kind) => kind.as_str().into(),
            ColumnKind::Lab(loinc) => {
                let name = lab_by_loinc(loinc).map_or("?", |a| a.name);
                format!("{name} (LOINC: {loinc})")
            }
            ColumnKind::OneHot(group, level) => group.level_label(level),
            ColumnKind::Ccs(id) => format!("CCS {id}"),
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, ColumnKind::Age | ColumnKind::CciMean | ColumnKind::Vital(_) | ColumnKind::Lab(_))
    }
}

/// Ordered feature columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    columns: Vec<ColumnKind>,
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    columns: Vec<String>,
}

impl FeatureSchema {
    /// The standard layout: age, CCI, vitals, panel labs, demographic
    /// one-hot groups, then one flag per CCS category in ascending id order.
    pub fn standard(ccs: &CcsMap) -> Self {
        let mut columns = vec![ColumnKind::Age, ColumnKind::CciMean];
        columns.extend(VitalKind::ALL.iter().map(|&k| ColumnKind::Vital(k)));
        columns.extend(LAB_PANEL.iter().map(|a| ColumnKind::Lab(a.loinc)));
        for group in CategoricalGroup::ALL {
            columns.extend(group.levels().into_iter().map(|l| ColumnKind::OneHot(group, l)));
        }
        columns.extend(ccs.categories().iter().map(|c| ColumnKind::Ccs(c.id)));
        Self { columns }
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let columns = names
            .iter()
            .map(|n| ColumnKind::parse(n.as_ref()).ok_or_else(|| Error::Schema(format!("unknown column {:?}", n.as_ref()))))
            .collect::<Result<Vec<_>>>()?;
        let distinct: BTreeSet<String> = columns.iter().map(ColumnKind::name).collect();
        if distinct.len() != columns.len() {
            return Err(Error::Schema("duplicate column names".into()));
        }
        Ok(Self { columns })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[ColumnKind] {
        &self.columns
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(ColumnKind::name).collect()
    }

    pub fn index_of(&self, kind: &ColumnKind) -> Option<usize> {
        self.columns.iter().position(|c| c == kind)
    }

    pub fn require(&self, kind: &ColumnKind) -> Result<usize> {
        self.index_of(kind)
            .ok_or_else(|| Error::Schema(format!("required column {} absent", kind.name())))
    }

    /// Contiguous column range of each one-hot group present in the schema.
    pub fn one_hot_groups(&self) -> Vec<(CategoricalGroup, Range<usize>)> {
        let mut out: Vec<(CategoricalGroup, Range<usize>)> = Vec::new();
        for (i, c) in self.columns.iter().enumerate() {
            if let ColumnKind::OneHot(g, _) = c {
                match out.last_mut() {
                    Some((last, range)) if last == g && range.end == i => range.end = i + 1,
                    _ => out.push((*g, i..i + 1)),
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let file = SchemaFile { columns: self.names() };
        serde_json::to_string_pretty(&file).expect("schema serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SchemaFile = serde_json::from_str(text)?;
        Self::from_names(&file.columns)
    }
}

/// Dense row-major matrix with a per-cell missing mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    schema: FeatureSchema,
    patient_ids: Vec<String>,
    labels: Vec<u8>,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl FeatureMatrix {
    /// Builds a matrix from rows where `None` marks a missing cell.
    pub fn from_rows(
        schema: FeatureSchema,
        patient_ids: Vec<String>,
        rows: Vec<Vec<Option<f64>>>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let n_cols = schema.len();
        if rows.len() != patient_ids.len() || rows.len() != labels.len() {
            return Err(Error::Consistency(format!(
                "{} rows, {} ids, {} labels",
                rows.len(),
                patient_ids.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::Consistency("labels must be 0 or 1".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        let mut missing = Vec::with_capacity(rows.len() * n_cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Consistency(format!("row {r} has {} cells, schema has {n_cols}", row.len())));
            }
            for cell in row {
                match cell {
                    Some(v) if v.is_finite() => {
                        values.push(*v);
                        missing.push(false);
                    }
                    Some(v) => return Err(Error::Consistency(format!("row {r}: non-finite value {v}"))),
                    None => {
                        values.push(0.0);
                        missing.push(true);
                    }
                }
            }
        }
        Ok(Self {
            schema,
            patient_ids,
            labels,
            values,
            missing,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn patient_ids(&self) -> &[String] {
        &self.patient_ids
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.n_cols() + col;
        (!self.missing[i]).then_some(self.values[i])
    }

    pub fn row(&self, row: usize) -> Vec<Option<f64>> {
        (0..self.n_cols()).map(|c| self.get(row, c)).collect()
    }

    pub fn column(&self, col: usize) -> Vec<Option<f64>> {
        (0..self.n_rows()).map(|r| self.get(r, col)).collect()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let n = self.n_cols();
        let mut values = Vec::with_capacity(indices.len() * n);
        let mut missing = Vec::with_capacity(indices.len() * n);
        for &r in indices {
            values.extend_from_slice(&self.values[r * n..(r + 1) * n]);
            missing.extend_from_slice(&self.missing[r * n..(r + 1) * n]);
        }
        Self {
            schema: self.schema.clone(),
            patient_ids: indices.iter().map(|&r| self.patient_ids[r].clone()).collect(),
            labels: indices.iter().map(|&r| self.labels[r]).collect(),
            values,
            missing,
        }
    }

    /// Writes `patient_id,label,<columns>`; missing cells are empty.
    pub fn write_csv(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        if let Some(c) = comment {
            writeln!(file, "# {c}").map_err(|e| Error::io(path, e))?;
        }
        let mut w = csv::Writer::from_writer(file);
        let mut header = vec!["patient_id".to_string(), "label".to_string()];
        header.extend(self.schema.names());
        w.write_record(&header)?;
        for r in 0..self.n_rows() {
            let mut rec = vec![self.patient_ids[r].clone(), self.labels[r].to_string()];
            rec.extend(self.row(r).into_iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let label = path.display().to_string();
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
        let headers = r.headers()?.clone();
        if headers.get(0) != Some("patient_id") || headers.get(1) != Some("label") {
            return Err(Error::Schema(format!("{label}: header must start with patient_id,label")));
        }
        let names: Vec<&str> = headers.iter().skip(2).collect();
        let schema = FeatureSchema::from_names(&names)?;
        let (mut ids, mut labels, mut rows) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            ids.push(rec.get(0).unwrap_or("").to_string());
            labels.push(match rec.get(1) {
                Some("0") => 0,
                Some("1") => 1,
                _ => return Err(Error::row(label.clone(), line, "label must be 0 or 1")),
            });
            let row = rec
                .iter()
                .skip(2)
                .map(|cell| match cell {
                    "" => Ok(None),
                    t => t
                        .parse::<f64>()
                        .map(Some)
                        .map_err(|_| Error::row(label.clone(), line, format!("unparseable value {t:?}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(schema, ids, rows, labels)
    }
}

/// Counts events consumed by aggregation and how many of them fell after
/// the member's prediction point. A correct build leaves `violations` at 0.
#[derive(Debug, Default)]
pub struct WindowGuard {
    consumed: AtomicU64,
    violations: AtomicU64,
}

impl WindowGuard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&self, event_date: NaiveDate, prediction_point: NaiveDate) {
        self.consumed.fetch_add(1, Ordering::Relaxed);
        if event_date > prediction_point {
            self.violations.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn consumed(&self) -> u64 {
        self.consumed.load(Ordering::Relaxed)
    }

    pub fn violations(&self) -> u64 {
        self.violations.load(Ordering::Relaxed)
    }
}

/// Mean of values dated on or before `prediction_point`.
///
/// Accumulated as a running mean, which returns a constant series' value
/// exactly (a plain sum divided by the count can be off in the last bit).
pub fn mean_in_window(series: &[(NaiveDate, f64)], prediction_point: NaiveDate) -> Option<f64> {
    let mut mean = None;
    for (i, (_, v)) in series.iter().filter(|(d, _)| *d <= prediction_point).enumerate() {
        mean = Some(match mean {
            None => *v,
            Some(m) => m + (v - m) / (i + 1) as f64,
        });
    }
    mean
}

/// One flag per category of `ccs`, in ascending id order.
pub fn diagnosis_flags<'a>(diagnoses: impl IntoIterator<Item = &'a DiagnosisEvent>, ccs: &CcsMap) -> Vec<bool> {
    let ids: Vec<u32> = ccs.categories().iter().map(|c| c.id).collect();
    let mut flags = vec![false; ids.len()];
    for d in diagnoses {
        if let Some(id) = ccs.lookup_code(&d.code) {
            if let Ok(pos) = ids.binary_search(&id) {
                flags[pos] = true;
            }
        }
    }
    flags
}

/// Completed years of age. A Feb 29 birthday falls on Mar 1 in common years.
pub fn age_at(prediction_point: NaiveDate, birth_date: NaiveDate) -> Result<u32> {
    if birth_date > prediction_point {
        return Err(Error::InvalidDemographics {
            patient_id: String::new(),
            reason: format!("birth date {birth_date} after prediction point {prediction_point}"),
        });
    }
    let year = prediction_point.year();
    let birthday = NaiveDate::from_ymd_opt(year, birth_date.month(), birth_date.day())
        .unwrap_or_else(|| NaiveDate::from_ymd_opt(year, 3, 1).expect("Mar 1 exists"));
    let mut years = year - birth_date.year();
    if prediction_point < birthday {
        years -= 1;
    }
    Ok(years as u32)
}

/// Average per-encounter Charlson score over encounters on or before the
/// prediction point. Diagnoses dated on an encounter's day belong to it.
/// Returns `None` when no encounter falls in the window.
pub fn mean_cci(
    records: &ClinicalRecordSet,
    patient_id: &str,
    prediction_point: NaiveDate,
    charlson: &CharlsonMap,
) -> Option<f64> {
    mean_cci_guarded(records, patient_id, prediction_point, charlson, &WindowGuard::new())
}

fn mean_cci_guarded(
    records: &ClinicalRecordSet,
    patient_id: &str,
    prediction_point: NaiveDate,
    charlson: &CharlsonMap,
    guard: &WindowGuard,
) -> Option<f64> {
    let ev = records.events(patient_id);
    let in_window: Vec<_> = ev.encounters.iter().filter(|e| e.date <= prediction_point).collect();
    if in_window.is_empty() {
        return None;
    }
    let mut total = 0u64;
    for e in &in_window {
        guard.observe(e.date, prediction_point);
        let lo = ev.diagnoses.partition_point(|d| d.date < e.date);
        let hi = ev.diagnoses.partition_point(|d| d.date <= e.date);
        let codes = ev.diagnoses[lo..hi].iter().map(|d| {
            guard.observe(d.date, prediction_point);
            &d.code
        });
        total += u64::from(charlson.score(codes));
    }
    let n_encounters = in_window.len();
    Some(total as f64 / n_encounters as f64)
}

/// Statistics from one matrix assembly.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyReport {
    pub rows: usize,
    pub events_consumed: u64,
    pub window_violations: u64,
    pub members_without_encounters: usize,
}

fn one_hot_level(group: CategoricalGroup, records: &ClinicalRecordSet, terms: &Terminology, patient_id: &str) -> String {
    let p = records.patient(patient_id).expect("member exists");
    let known = |levels: &[&str], v: &str| {
        let v = v.trim();
        levels.iter().find(|l| l.eq_ignore_ascii_case(v)).map_or(UNKNOWN.to_string(), |l| l.to_string())
    };
    match group {
        CategoricalGroup::Gender => p.gender.as_str().to_string(),
        CategoricalGroup::Race => known(&RACE_LEVELS, &p.race),
        CategoricalGroup::MaritalStatus => known(&MARITAL_LEVELS, &p.marital_status),
        CategoricalGroup::Rucc => match terms.rucc.class_of(p.county_fips.as_deref()) {
            RuccClass::Code(c) => c.to_string(),
            RuccClass::Unknown => UNKNOWN.to_string(),
        },
    }
}

/// Builds one row per cohort member, in cohort order, using only events
/// dated on or before each member's prediction point.
pub fn assemble_matrix(
    records: &ClinicalRecordSet,
    cohort: &[CohortAssignment],
    terms: &Terminology,
) -> Result<(FeatureMatrix, AssemblyReport)> {
    let guard = WindowGuard::new();
    let schema = FeatureSchema::standard(&terms.ccs);
    let built: Vec<(Vec<Option<f64>>, bool)> = cohort
        .par_iter()
        .map(|m| build_row(records, m, terms, &schema, &guard))
        .collect::<Result<_>>()?;
    let members_without_encounters = built.iter().filter(|(_, no_enc)| *no_enc).count();
    let rows: Vec<Vec<Option<f64>>> = built.into_iter().map(|(r, _)| r).collect();
    let labels = cohort.iter().map(|m| u8::from(m.label == Label::Case)).collect();
    let ids = cohort.iter().map(|m| m.patient_id.clone()).collect();
    let matrix = FeatureMatrix::from_rows(schema, ids, rows, labels)?;
    for (group, range) in matrix.schema().one_hot_groups() {
        for r in 0..matrix.n_rows() {
            let sum: f64 = range.clone().filter_map(|c| matrix.get(r, c)).sum();
            if sum != 1.0 {
                return Err(Error::Consistency(format!("row {r}: {} one-hot sums to {sum}", group.key())));
            }
        }
    }
    let report = AssemblyReport {
        rows: matrix.n_rows(),
        events_consumed: guard.consumed(),
        window_violations: guard.violations(),
        members_without_encounters,
    };
    Ok((matrix, report))
}

fn build_row(
    records: &ClinicalRecordSet,
    member: &CohortAssignment,
    terms: &Terminology,
    schema: &FeatureSchema,
    guard: &WindowGuard,
) -> Result<(Vec<Option<f64>>, bool)> {
    let pp = member.prediction_point;
    let patient = records.patient(&member.patient_id).ok_or_else(|| {
        Error::Consistency(format!("cohort member {} not in record set", member.patient_id))
    })?;
    let ev = records.events(&member.patient_id);
    let age = age_at(pp, patient.birth_date).map_err(|e| match e {
        Error::InvalidDemographics { reason, .. } => Error::InvalidDemographics {
            patient_id: member.patient_id.clone(),
            reason,
        },
        other => other,
    })?;
    let cci = mean_cci_guarded(records, &member.patient_id, pp, &terms.charlson, guard);
    let in_window_dx: Vec<&DiagnosisEvent> = ev
        .diagnoses
        .iter()
        .filter(|d| d.date <= pp)
        .inspect(|d| guard.observe(d.date, pp))
        .collect();
    let flags = diagnosis_flags(in_window_dx.iter().copied(), &terms.ccs);
    let ccs_ids: Vec<u32> = terms.ccs.categories().iter().map(|c| c.id).collect();

    let mut row = Vec::with_capacity(schema.len());
    for column in schema.columns() {
        let cell = match column {
            ColumnKind::Age => Some(f64::from(age)),
            ColumnKind::CciMean => Some(cci.unwrap_or(0.0)),
            ColumnKind::Vital(kind) => {
                let series: Vec<(NaiveDate, f64)> = ev
                    .vitals
                    .iter()
                    .filter(|v| v.kind == *kind && v.date <= pp)
                    .inspect(|v| guard.observe(v.date, pp))
                    .map(|v| (v.date, v.value))
                    .collect();
                mean_in_window(&series, pp)
            }
            ColumnKind::Lab(loinc) => {
                let series: Vec<(NaiveDate, f64)> = ev
                    .labs
                    .iter()
                    .filter(|l| l.loinc == *loinc && l.date <= pp)
                    .inspect(|l| guard.observe(l.date, pp))
                    .map(|l| (l.date, l.value))
                    .collect();
                mean_in_window(&series, pp)
            }
            ColumnKind::OneHot(group, level) => {
                Some(f64::from(u8::from(one_hot_level(*group, records, terms, &member.patient_id) == *level)))
            }
            ColumnKind::Ccs(id) => {
                let pos = ccs_ids
                    .binary_search(id)
                    .map_err(|_| Error::Consistency(format!("schema CCS category {id} not in map")))?;
                Some(f64::from(u8::from(flags[pos])))
            }
        };
        row.push(cell);
    }
    Ok((row, cci.is_none()))
}
