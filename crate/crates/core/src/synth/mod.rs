//! Synthetic EHR extracts whose cohort-level marginals match configured
//! group statistics.
//!
//! Each member has a latent level per continuous variable. Levels are drawn
//! per group with Latin-hypercube stratification and categorical values by
//! exact quotas, so group marginals sit close to their targets even for
//! small groups. Per-patient detail (visit dates, measurement noise, codes)
//! comes from a stream seeded by the patient ordinal, which keeps generation
//! order-independent and parallel.
//!
//! Only the prediction-point visit of a member is recorded as an encounter;
//! earlier visits contribute lab, vital and diagnosis rows. The matched
//! encounter of a control is therefore its designed prediction point.

mod defaults;
mod dist;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use defaults::{default_config, ALBUMIN_BOUNDS};
pub use dist::{truncated_moments, ContinuousSpec, Distribution, Sampler};

use crate::cohort::{prediction_point, CohortAssignment, Label, MatchAnchor};
use crate::ehr::{
    ClinicalRecordSet, DiagnosisEvent, Encounter, Gender, IcdCode, IcdVersion, LabResult, PatientRecord, VitalKind,
    VitalSign, ALBUMIN, ALP, ALT, AST, BILIRUBIN, LAB_PANEL, PLATELETS, PT,
};
use crate::features::{CategoricalGroup, UNKNOWN};
use crate::stats::special::normal_quantile;
use crate::terminology::RuccTable;
use crate::util::{fnv1a, parse_date, splitmix64};
use crate::{Error, Result};

/// First day coded in ICD-10-CM.
pub const ICD10_START: (i32, u32, u32) = (2015, 10, 1);

/// Continuous variable keys: age, CCI, the vitals, then panel LOINCs.
pub fn continuous_keys() -> Vec<String> {
    let mut keys = vec!["age".to_string(), "cci".to_string()];
    keys.extend(VitalKind::ALL.iter().map(|k| k.as_str().to_string()));
    keys.extend(LAB_PANEL.iter().map(|a| a.loinc.to_string()));
    keys
}

/// Marginal targets of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub continuous: BTreeMap<String, ContinuousSpec>,
    /// Variable key (`gender`, `race`, `marital_status`, `rucc`) to level
    /// proportions. RUCC levels are the codes `1`-`9` or `Unknown`.
    pub categorical: BTreeMap<String, BTreeMap<String, f64>>,
    /// Demo CCS category id to prevalence.
    pub ccs_prevalence: BTreeMap<u32, f64>,
}

/// Variables whose case and control distributions differ. Everything else
/// is drawn from the overall distribution in both groups. Keys are
/// continuous keys, categorical keys, or `ccs:<id>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSignalSpec {
    pub variables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub window_years: u32,
    pub n_cases: usize,
    pub n_controls: usize,
    pub overall: GroupSpec,
    pub controls: GroupSpec,
    pub cases: GroupSpec,
    pub planted: PlantedSignalSpec,
    /// Years of history before the prediction point.
    pub history_years: f64,
    /// Expected history visits per year, each carrying a partial panel.
    pub visits_per_year: f64,
    /// Chance that a history visit measures a given panel series.
    pub series_per_visit: f64,
    /// Coefficient of variation of a single measurement around the level.
    pub measurement_cv: f64,
    /// Share of members missing one panel series in the observation window.
    pub incomplete_fraction: f64,
    /// Controls sit this many days or fewer from their anchor case.
    pub anchor_jitter_days: i64,
    pub index_date_start: NaiveDate,
    pub index_date_end: NaiveDate,
    pub rng_seed: u64,
}

impl GeneratorConfig {
    /// Non-calibration settings shared by the defaults.
    fn base(window_years: u32) -> Self {
        let empty = GroupSpec {
            continuous: BTreeMap::new(),
            categorical: BTreeMap::new(),
            ccs_prevalence: BTreeMap::new(),
        };
        Self {
            window_years,
            n_cases: 0,
            n_controls: 0,
            overall: empty.clone(),
            controls: empty.clone(),
            cases: empty,
            planted: PlantedSignalSpec { variables: Vec::new() },
            history_years: 4.0,
            visits_per_year: 2.0,
            series_per_visit: 0.6,
            measurement_cv: 0.05,
            incomplete_fraction: 0.05,
            anchor_jitter_days: 7,
            index_date_start: parse_date("2012-01-01").expect("valid"),
            index_date_end: parse_date("2021-12-31").expect("valid"),
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::Config(why));
        if self.window_years < 1 {
            return bad("window_years must be >= 1".into());
        }
        if !(self.history_years > 0.0 && self.history_years.is_finite()) {
            return bad("history_years must be positive".into());
        }
        if !(self.visits_per_year > 0.0 && self.visits_per_year.is_finite()) {
            return bad("visits_per_year must be positive".into());
        }
        for (name, v) in [
            ("series_per_visit", self.series_per_visit),
            ("incomplete_fraction", self.incomplete_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1]"));
            }
        }
        if !(self.measurement_cv >= 0.0 && self.measurement_cv < 1.0) {
            return bad("measurement_cv must be in [0, 1)".into());
        }
        if self.anchor_jitter_days < 0 {
            return bad("anchor_jitter_days must be >= 0".into());
        }
        if self.index_date_end < self.index_date_start {
            return bad("index_date_end precedes index_date_start".into());
        }
        let keys = continuous_keys();
        for (gname, g) in [("overall", &self.overall), ("controls", &self.controls), ("cases", &self.cases)] {
            for key in &keys {
                let spec = g
                    .continuous
                    .get(key)
                    .ok_or_else(|| Error::Config(format!("{gname}: continuous spec for {key} missing")))?;
                spec.validate(&format!("{gname}.{key}"))?;
            }
            for group in CategoricalGroup::ALL {
                let props = g
                    .categorical
                    .get(group.key())
                    .ok_or_else(|| Error::Config(format!("{gname}: proportions for {} missing", group.key())))?;
                let levels = group.levels();
                let mut sum = 0.0;
                for (level, p) in props {
                    let known = levels.contains(level) || (group == CategoricalGroup::Race && !level.is_empty());
                    if !known {
                        return bad(format!("{gname}.{}: unknown level {level:?}", group.key()));
                    }
                    if !(0.0..=1.0).contains(p) {
                        return bad(format!("{gname}.{}.{level}: proportion out of range", group.key()));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > 1e-9 {
                    return bad(format!("{gname}.{}: proportions sum to {sum}", group.key()));
                }
            }
            for (id, p) in &g.ccs_prevalence {
                if codes_for_ccs(*id).is_none() {
                    return bad(format!("{gname}: no generator codes for CCS category {id}"));
                }
                if !(0.0..=1.0).contains(p) {
                    return bad(format!("{gname}: CCS {id} prevalence out of range"));
                }
            }
        }
        for v in &self.planted.variables {
            let exists = keys.contains(v)
                || CategoricalGroup::ALL.iter().any(|g| g.key() == v)
                || v
                    .strip_prefix("ccs:")
                    .and_then(|id| id.parse::<u32>().ok())
                    .is_some_and(|id| self.overall.ccs_prevalence.contains_key(&id));
            if !exists {
                return bad(format!("planted variable {v:?} is not configured"));
            }
        }
        Ok(())
    }

    fn is_planted(&self, key: &str) -> bool {
        self.planted.variables.iter().any(|v| v == key)
    }

    /// Specs actually used for a group: planted variables from the group,
    /// the rest from the overall column.
    pub fn effective(&self, label: Label) -> GroupSpec {
        let group = match label {
            Label::Case => &self.cases,
            Label::Control => &self.controls,
        };
        let pick = |key: &str| if self.is_planted(key) { group } else { &self.overall };
        GroupSpec {
            continuous: self
                .overall
                .continuous
                .keys()
                .map(|k| (k.clone(), pick(k).continuous[k]))
                .collect(),
            categorical: self
                .overall
                .categorical
                .keys()
                .map(|k| (k.clone(), pick(k).categorical[k].clone()))
                .collect(),
            ccs_prevalence: self
                .overall
                .ccs_prevalence
                .keys()
                .map(|id| {
                    let src = pick(&format!("ccs:{id}"));
                    (*id, src.ccs_prevalence.get(id).copied().unwrap_or(self.overall.ccs_prevalence[id]))
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

/// Ground truth for one generated patient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthRow {
    pub patient_id: String,
    pub label: Label,
    pub index_date: Option<NaiveDate>,
    /// Designed prediction point: the case's index date minus the window, or
    /// the control's anchor visit.
    pub prediction_point: NaiveDate,
}

#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub records: ClinicalRecordSet,
    pub truth: Vec<TruthRow>,
}

impl GeneratedData {
    /// Truth as a cohort, for aggregating at the designed prediction points.
    pub fn truth_cohort(&self, window_years: u32) -> Vec<CohortAssignment> {
        self.truth
            .iter()
            .map(|t| CohortAssignment {
                patient_id: t.patient_id.clone(),
                label: t.label,
                index_date: t.index_date,
                prediction_point: t.prediction_point,
                window_years,
                anchor: None::<MatchAnchor>,
            })
            .collect()
    }
}

/// Weight-1 Charlson categories outside any hierarchy, as (ICD-9, ICD-10)
/// codes: myocardial infarction, heart failure, peripheral vascular,
/// cerebrovascular, dementia, rheumatic disease, peptic ulcer.
pub const CHARLSON_CODES: [(&str, &str); 7] = [
    ("410.90", "I21.9"),
    ("428.0", "I50.9"),
    ("443.9", "I73.9"),
    ("434.91", "I63.9"),
    ("290.0", "F03.90"),
    ("714.0", "M06.9"),
    ("531.90", "K27.9"),
];

/// Representative (ICD-9, ICD-10) codes for each demo CCS category.
pub fn codes_for_ccs(category: u32) -> Option<(&'static str, &'static str)> {
    Some(match category {
        1 => ("278.00", "E66.9"),
        2 => ("272.4", "E78.5"),
        3 => ("571.8", "K75.81"),
        4 => ("466.0", "J20.9"),
        5 => ("530.81", "K21.9"),
        6 => ("729.1", "M79.7"),
        7 => ("327.23", "G47.33"),
        8 => ("721.3", "M47.816"),
        9 => ("724.2", "M54.5"),
        10 => ("401.9", "I10"),
        11 => ("311", "F32.9"),
        12 => ("300.02", "F41.1"),
        13 => ("574.20", "K80.20"),
        14 => ("V85.35", "Z68.35"),
        15 => ("790.29", "R73.03"),
        _ => return None,
    })
}

const FATTY_LIVER_CODES: (&str, &str) = ("571.8", "K76.0");
const LC_CODES_ICD9: [&str; 2] = ["571.2", "571.3"];
const LC_CODES_ICD10: [&str; 3] = ["K70.30", "K74.60", "K74.69"];

fn icd10_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(ICD10_START.0, ICD10_START.1, ICD10_START.2).expect("valid")
}

fn code_on(date: NaiveDate, codes: (&str, &str)) -> IcdCode {
    if date < icd10_start() {
        IcdCode::new(codes.0, IcdVersion::Icd9).expect("valid builtin code")
    } else {
        IcdCode::new(codes.1, IcdVersion::Icd10).expect("valid builtin code")
    }
}

fn stream(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ splitmix64(fnv1a(tag.as_bytes())))
}

/// Uniform in the open interval (0, 1).
fn open01(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Latin-hypercube uniforms: one draw from each of `n` equal strata, in
/// random order.
fn stratified_uniforms(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut strata: Vec<usize> = (0..n).collect();
    strata.shuffle(rng);
    strata
        .into_iter()
        .map(|s| (s as f64 + open01(rng)) / n as f64)
        .collect()
}

/// Exactly apportioned labels (largest remainder), in random order.
fn quota<T: Clone>(n: usize, props: &[(T, f64)], rng: &mut impl Rng) -> Vec<T> {
    let total: f64 = props.iter().map(|(_, p)| p).sum();
    let exact: Vec<f64> = props.iter().map(|(_, p)| p / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..props.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().take(n - assigned) {
        counts[i] += 1;
    }
    let mut out: Vec<T> = props
        .iter()
        .zip(&counts)
        .flat_map(|((v, _), &c)| std::iter::repeat_n(v.clone(), c))
        .collect();
    out.shuffle(rng);
    out
}

/// Group-level draws for one label.
struct GroupDraws {
    continuous: BTreeMap<String, Vec<f64>>,
    categorical: BTreeMap<String, Vec<String>>,
    ccs: BTreeMap<u32, Vec<bool>>,
}

fn draw_group(spec: &GroupSpec, n: usize, seed: u64, label: Label) -> Result<GroupDraws> {
    let tag = label.as_str();
    let mut continuous = BTreeMap::new();
    for (key, s) in &spec.continuous {
        let sampler = Sampler::new(s)?;
        let mut rng = stream(seed, &format!("{tag}/continuous/{key}"));
        continuous.insert(key.clone(), stratified_uniforms(n, &mut rng).into_iter().map(|u| sampler.quantile(u)).collect());
    }
    let mut categorical = BTreeMap::new();
    for (key, props) in &spec.categorical {
        let mut rng = stream(seed, &format!("{tag}/categorical/{key}"));
        let props: Vec<(String, f64)> = props.iter().map(|(l, p)| (l.clone(), *p)).collect();
        categorical.insert(key.clone(), quota(n, &props, &mut rng));
    }
    let mut ccs = BTreeMap::new();
    for (&id, &p) in &spec.ccs_prevalence {
        let mut rng = stream(seed, &format!("{tag}/ccs/{id}"));
        ccs.insert(id, quota(n, &[(true, p), (false, 1.0 - p)], &mut rng));
    }
    Ok(GroupDraws {
        continuous,
        categorical,
        ccs,
    })
}

/// Everything the per-patient step needs about one member.
struct MemberPlan {
    ordinal: usize,
    patient_id: String,
    label: Label,
    index_date: Option<NaiveDate>,
    prediction_point: NaiveDate,
    levels: BTreeMap<String, f64>,
    categories: BTreeMap<String, String>,
    ccs: Vec<u32>,
}

#[derive(Default)]
struct PatientRows {
    patient: Option<PatientRecord>,
    encounters: Vec<Encounter>,
    diagnoses: Vec<DiagnosisEvent>,
    labs: Vec<LabResult>,
    vitals: Vec<VitalSign>,
}

/// Generates a record set and its ground truth.
pub fn generate(config: &GeneratorConfig) -> Result<GeneratedData> {
    config.validate()?;
    let (nk, nc) = (config.n_cases, config.n_controls);
    let n = nk + nc;
    let seed = config.rng_seed;
    let rucc = crate::terminology::Terminology::builtin().rucc;

    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut stream(seed, "patient-ids"));
    let id_of = |ordinal: usize| format!("P{:07}", ids[ordinal] + 1);

    let case_draws = draw_group(&config.effective(Label::Case), nk, seed, Label::Case)?;
    let control_draws = draw_group(&config.effective(Label::Control), nc, seed, Label::Control)?;

    let span = (config.index_date_end - config.index_date_start).num_days();
    let mut timing = stream(seed, "case-index-dates");
    let index_dates: Vec<NaiveDate> = (0..nk)
        .map(|_| config.index_date_start + Duration::days(timing.gen_range(0..=span)))
        .collect();
    let case_points: Vec<NaiveDate> = index_dates.iter().map(|&d| prediction_point(d, config.window_years)).collect();
    let mut anchoring = stream(seed, "control-anchors");
    let control_points: Vec<NaiveDate> = (0..nc)
        .map(|_| {
            let base = if nk > 0 {
                case_points[anchoring.gen_range(0..nk)]
            } else {
                prediction_point(
                    config.index_date_start + Duration::days(anchoring.gen_range(0..=span)),
                    config.window_years,
                )
            };
            base + Duration::days(anchoring.gen_range(-config.anchor_jitter_days..=config.anchor_jitter_days))
        })
        .collect();

    let plan = |ordinal: usize| -> MemberPlan {
        let (label, i, draws) = if ordinal < nk {
            (Label::Case, ordinal, &case_draws)
        } else {
            (Label::Control, ordinal - nk, &control_draws)
        };
        MemberPlan {
            ordinal,
            patient_id: id_of(ordinal),
            label,
            index_date: (label == Label::Case).then(|| index_dates[i]),
            prediction_point: if label == Label::Case { case_points[i] } else { control_points[i] },
            levels: draws.continuous.iter().map(|(k, v)| (k.clone(), v[i])).collect(),
            categories: draws.categorical.iter().map(|(k, v)| (k.clone(), v[i].clone())).collect(),
            ccs: draws.ccs.iter().filter(|(_, v)| v[i]).map(|(id, _)| *id).collect(),
        }
    };
    let plans: Vec<MemberPlan> = (0..n).map(plan).collect();
    let rows: Vec<PatientRows> = plans.par_iter().map(|p| patient_rows(p, config, &rucc)).collect();

    let mut all = PatientRows::default();
    let mut patients = Vec::with_capacity(n);
    for r in rows {
        patients.extend(r.patient);
        all.encounters.extend(r.encounters);
        all.diagnoses.extend(r.diagnoses);
        all.labs.extend(r.labs);
        all.vitals.extend(r.vitals);
    }
    let records = ClinicalRecordSet::new(patients, all.encounters, all.diagnoses, all.labs, all.vitals)?;
    let mut truth: Vec<TruthRow> = plans
        .into_iter()
        .map(|p| TruthRow {
            patient_id: p.patient_id,
            label: p.label,
            index_date: p.index_date,
            prediction_point: p.prediction_point,
        })
        .collect();
    truth.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    Ok(GeneratedData { records, truth })
}

/// One noisy measurement around `level`, rounded to two decimals and kept
/// positive.
fn measure(level: f64, cv: f64, rng: &mut impl Rng) -> f64 {
    let sigma = (1.0 + cv * cv).ln().sqrt();
    let z = normal_quantile(open01(rng));
    let v = level * (sigma * z - sigma * sigma / 2.0).exp();
    ((v * 100.0).round() / 100.0).max(0.01)
}

/// Panel series: nine labs then three vitals.
enum Series {
    Lab(&'static str),
    Vital(VitalKind),
}

fn panel_series() -> Vec<(String, Series)> {
    let mut out: Vec<(String, Series)> = LAB_PANEL.iter().map(|a| (a.loinc.to_string(), Series::Lab(a.loinc))).collect();
    out.extend(VitalKind::ALL.iter().map(|&k| (k.as_str().to_string(), Series::Vital(k))));
    out
}

/// How far past-prediction values of a case drift from its level.
fn progression_factor(loinc: &str) -> f64 {
    match loinc {
        l if l == AST.loinc => 2.5,
        l if l == ALT.loinc => 2.0,
        l if l == BILIRUBIN.loinc => 2.5,
        l if l == ALP.loinc => 1.5,
        l if l == PT.loinc => 1.2,
        l if l == PLATELETS.loinc => 0.6,
        l if l == ALBUMIN.loinc => 0.8,
        _ => 1.0,
    }
}

fn patient_rows(plan: &MemberPlan, config: &GeneratorConfig, rucc: &RuccTable) -> PatientRows {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed ^ splitmix64(plan.ordinal as u64 + 1));
    let pid = &plan.patient_id;
    let pp = plan.prediction_point;
    let mut out = PatientRows::default();

    let age = plan.levels["age"];
    let birth_date = pp - Duration::days(((age + 0.5) * 365.2425).round() as i64);
    let county_fips = match plan.categories.get("rucc").map(String::as_str) {
        Some(level) if level != UNKNOWN => level
            .parse::<u8>()
            .ok()
            .map(|code| rucc.counties_with(code))
            .filter(|c| !c.is_empty())
            .map(|c| c[rng.gen_range(0..c.len())].to_string()),
        _ => None,
    };
    out.patient = Some(PatientRecord {
        patient_id: pid.clone(),
        birth_date,
        gender: Gender::parse(plan.categories.get("gender").map_or("", String::as_str)),
        race: plan.categories.get("race").cloned().unwrap_or_else(|| UNKNOWN.into()),
        marital_status: plan.categories.get("marital_status").cloned().unwrap_or_else(|| UNKNOWN.into()),
        county_fips,
    });

    // History visits: a full panel at the start, then partial panels.
    let history_days = (config.history_years * 365.25).round() as i64;
    let start = pp - Duration::days(history_days);
    let expected = config.visits_per_year * config.history_years;
    let n_visits = expected.floor() as usize + usize::from(rng.gen::<f64>() < expected.fract());
    let mut visits: Vec<NaiveDate> = (0..n_visits)
        .map(|_| start + Duration::days(rng.gen_range(1..history_days.max(2))))
        .collect();
    visits.sort_unstable();
    let series = panel_series();
    let dropped = (rng.gen::<f64>() < config.incomplete_fraction).then(|| rng.gen_range(0..series.len()));

    let record = |out: &mut PatientRows, date: NaiveDate, s: &Series, value: f64| match s {
        Series::Lab(loinc) => out.labs.push(LabResult {
            patient_id: pid.clone(),
            date,
            loinc: loinc.to_string(),
            value,
        }),
        Series::Vital(kind) => out.vitals.push(VitalSign {
            patient_id: pid.clone(),
            date,
            kind: *kind,
            value,
        }),
    };
    for (k, (key, s)) in series.iter().enumerate() {
        let level = plan.levels[key];
        let first = measure(level, config.measurement_cv, &mut rng);
        let mut values = vec![(start, first)];
        for &d in &visits {
            if rng.gen::<f64>() < config.series_per_visit {
                values.push((d, measure(level, config.measurement_cv, &mut rng)));
            }
        }
        if dropped != Some(k) {
            for (d, v) in values {
                record(&mut out, d, s, v);
            }
        }
    }

    // Diagnosis groups on history days, which are never encounter days.
    for &id in &plan.ccs {
        let codes = codes_for_ccs(id).expect("validated");
        let date = start + Duration::days(rng.gen_range(0..history_days));
        out.diagnoses.push(DiagnosisEvent {
            patient_id: pid.clone(),
            date,
            code: code_on(date, codes),
        });
    }

    // The prediction-point encounter carries the Charlson burden.
    let charlson_on = |out: &mut PatientRows, rng: &mut ChaCha8Rng, date: NaiveDate, level: f64| {
        let whole = level.floor();
        let k = (whole as usize + usize::from(rng.gen::<f64>() < level - whole)).min(CHARLSON_CODES.len());
        for i in index::sample(rng, CHARLSON_CODES.len(), k) {
            out.diagnoses.push(DiagnosisEvent {
                patient_id: pid.clone(),
                date,
                code: code_on(date, CHARLSON_CODES[i]),
            });
        }
    };
    out.encounters.push(Encounter {
        encounter_id: format!("{pid}-E1"),
        patient_id: pid.clone(),
        date: pp,
    });
    charlson_on(&mut out, &mut rng, pp, plan.levels["cci"]);

    // The qualifying fatty-liver code falls after the prediction point.
    let fatty_date = pp + Duration::days(rng.gen_range(1..=30));
    out.diagnoses.push(DiagnosisEvent {
        patient_id: pid.clone(),
        date: fatty_date,
        code: code_on(fatty_date, FATTY_LIVER_CODES),
    });

    if let Some(index_date) = plan.index_date {
        // Progression inside the prediction window. None of it may reach
        // the features.
        let gap = (index_date - pp).num_days();
        let mut late: Vec<NaiveDate> = (0..2).map(|_| pp + Duration::days(rng.gen_range(1..gap.max(2)))).collect();
        late.push(index_date);
        for (e, &date) in late.iter().enumerate() {
            out.encounters.push(Encounter {
                encounter_id: format!("{pid}-E{}", e + 2),
                patient_id: pid.clone(),
                date,
            });
            charlson_on(&mut out, &mut rng, date, plan.levels["cci"] + 1.0);
            for (key, s) in &series {
                let factor = match s {
                    Series::Lab(loinc) => progression_factor(loinc),
                    Series::Vital(_) => 1.0,
                };
                let v = measure(plan.levels[key] * factor, config.measurement_cv, &mut rng);
                record(&mut out, date, s, v);
            }
        }
        let lc = if index_date < icd10_start() {
            IcdCode::new(LC_CODES_ICD9[rng.gen_range(0..LC_CODES_ICD9.len())], IcdVersion::Icd9)
        } else {
            IcdCode::new(LC_CODES_ICD10[rng.gen_range(0..LC_CODES_ICD10.len())], IcdVersion::Icd10)
        };
        out.diagnoses.push(DiagnosisEvent {
            patient_id: pid.clone(),
            date: index_date,
            code: lc.expect("valid builtin code"),
        });
    }
    out
}

/// `patient_id,true_label,index_date,prediction_point`.
pub fn write_truth_csv(path: &Path, truth: &[TruthRow], comment: Option<&str>) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    if let Some(c) = comment {
        writeln!(file, "# {c}").map_err(|e| Error::io(path, e))?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["patient_id", "true_label", "index_date", "prediction_point"])?;
    for t in truth {
        w.write_record([
            t.patient_id.clone(),
            t.label.as_str().to_string(),
            t.index_date.map(|d| d.to_string()).unwrap_or_default(),
            t.prediction_point.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<TruthRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let label = path.display().to_string();
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |why: &str| Error::row(label.clone(), line, why);
        let date = |i: usize| rec.get(i).and_then(parse_date);
        out.push(TruthRow {
            patient_id: rec.get(0).unwrap_or("").to_string(),
            label: match rec.get(1) {
                Some("case") => Label::Case,
                Some("control") => Label::Control,
                _ => return Err(bad("true_label must be case or control")),
            },
            index_date: date(2),
            prediction_point: date(3).ok_or_else(|| bad("missing prediction_point"))?,
        });
    }
    Ok(out)
}
