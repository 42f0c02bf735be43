//! Temporal cohort construction: fatty-liver base population, cirrhosis
//! cases anchored on their first diagnosis, time-matched controls and the
//! complete-case panel filter.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ehr::{ClinicalRecordSet, CodePattern, IcdVersion, VitalKind, LAB_PANEL};
use crate::util::{fnv1a, parse_date, shift_years};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub fatty_liver_patterns: Vec<CodePattern>,
    pub lc_patterns: Vec<CodePattern>,
    pub window_years: u32,
    pub controls_per_case: usize,
    pub match_tolerance_days: i64,
    pub rng_seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        let p = |v, s| CodePattern::new(v, s).expect("valid default pattern");
        Self {
            fatty_liver_patterns: vec![p(IcdVersion::Icd9, "571.8"), p(IcdVersion::Icd10, "K76.0")],
            lc_patterns: vec![
                p(IcdVersion::Icd9, "571.2"),
                p(IcdVersion::Icd9, "571.3"),
                p(IcdVersion::Icd10, "K74.6x"),
                p(IcdVersion::Icd10, "K70.3x"),
            ],
            window_years: 1,
            controls_per_case: 5,
            match_tolerance_days: 7,
            rng_seed: 0,
        }
    }
}

impl CohortSpec {
    pub fn with_window(window_years: u32) -> Self {
        Self {
            window_years,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_years < 1 {
            return Err(Error::Config("window_years must be >= 1".into()));
        }
        if self.controls_per_case < 1 {
            return Err(Error::Config("controls_per_case must be >= 1".into()));
        }
        if self.match_tolerance_days < 0 {
            return Err(Error::Config("match_tolerance_days must be >= 0".into()));
        }
        if self.fatty_liver_patterns.is_empty() || self.lc_patterns.is_empty() {
            return Err(Error::Config("cohort code pattern lists must not be empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Case,
    Control,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Case => "case",
            Label::Control => "control",
        }
    }

    pub fn is_case(self) -> bool {
        self == Label::Case
    }
}

/// The case a control was drawn for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchAnchor {
    pub patient_id: String,
    pub prediction_point: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortAssignment {
    pub patient_id: String,
    pub label: Label,
    /// First cirrhosis diagnosis; cases only.
    pub index_date: Option<NaiveDate>,
    /// Last day of the observation window.
    pub prediction_point: NaiveDate,
    pub window_years: u32,
    /// Controls only.
    pub anchor: Option<MatchAnchor>,
}

/// Counts at each cohort-derivation stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortReport {
    pub window_years: u32,
    pub fatty_liver_total: usize,
    pub lc_patients: usize,
    pub non_lc_patients: usize,
    pub matched_controls: usize,
    pub cases_without_controls: usize,
    pub max_controls_per_case_before_dedup: usize,
    pub complete_case_cases: usize,
    pub complete_case_controls: usize,
}

/// Which series every member must have observed by the prediction point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelRequirement {
    pub loincs: Vec<String>,
    pub vitals: Vec<VitalKind>,
}

impl Default for PanelRequirement {
    fn default() -> Self {
        Self {
            loincs: LAB_PANEL.iter().map(|a| a.loinc.to_string()).collect(),
            vitals: VitalKind::ALL.to_vec(),
        }
    }
}

fn matches_any(patterns: &[CodePattern], code: &crate::ehr::IcdCode) -> bool {
    patterns.iter().any(|p| p.matches(code))
}

/// Patients with at least one diagnosis matching a fatty-liver pattern.
pub fn identify_fatty_liver(records: &ClinicalRecordSet, spec: &CohortSpec) -> BTreeSet<String> {
    records
        .diagnoses()
        .iter()
        .filter(|d| matches_any(&spec.fatty_liver_patterns, &d.code))
        .map(|d| d.patient_id.clone())
        .collect()
}

/// Earliest cirrhosis-coded diagnosis date, across both ICD versions.
pub fn first_lc_diagnosis(records: &ClinicalRecordSet, spec: &CohortSpec, patient_id: &str) -> Option<NaiveDate> {
    records
        .events(patient_id)
        .diagnoses
        .iter()
        .filter(|d| matches_any(&spec.lc_patterns, &d.code))
        .map(|d| d.date)
        .min()
}

/// `index_date` moved back by whole calendar years (Feb 29 -> Feb 28).
pub fn prediction_point(index_date: NaiveDate, window_years: u32) -> NaiveDate {
    shift_years(index_date, -(window_years as i32))
}

/// Cases among the fatty-liver patients, ordered by (index date, patient id).
pub fn lc_cases(records: &ClinicalRecordSet, spec: &CohortSpec, fatty: &BTreeSet<String>) -> Vec<CohortAssignment> {
    let mut cases: Vec<CohortAssignment> = fatty
        .iter()
        .filter_map(|id| {
            first_lc_diagnosis(records, spec, id).map(|index| CohortAssignment {
                patient_id: id.clone(),
                label: Label::Case,
                index_date: Some(index),
                prediction_point: prediction_point(index, spec.window_years),
                window_years: spec.window_years,
                anchor: None,
            })
        })
        .collect();
    cases.sort_by(|a, b| (a.index_date, &a.patient_id).cmp(&(b.index_date, &b.patient_id)));
    cases
}

/// Result of control sampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchedControls {
    /// Unique control patients, in case processing order.
    pub controls: Vec<CohortAssignment>,
    /// Controls drawn for each input case before deduplication.
    pub drawn_per_case: Vec<usize>,
}

/// Draws up to `controls_per_case` distinct never-cirrhosis fatty-liver
/// patients per case, each with an encounter within the tolerance of the
/// case's prediction point. The matched encounter date becomes the control's
/// prediction point. A patient eligible for several cases is kept once, for
/// the first case in input order.
///
/// Each case samples from its own stream seeded by `rng_seed ^ fnv1a(case id)`,
/// so results do not depend on scheduling.
pub fn sample_matched_controls(
    records: &ClinicalRecordSet,
    spec: &CohortSpec,
    cases: &[CohortAssignment],
) -> MatchedControls {
    let fatty = identify_fatty_liver(records, spec);
    let pool: HashSet<&str> = fatty
        .iter()
        .filter(|id| first_lc_diagnosis(records, spec, id).is_none())
        .map(String::as_str)
        .collect();

    // Pool encounters sorted by (date, patient, encounter id) for range queries.
    let mut timeline: Vec<(NaiveDate, &str, &str)> = records
        .encounters()
        .iter()
        .filter(|e| pool.contains(e.patient_id.as_str()))
        .map(|e| (e.date, e.patient_id.as_str(), e.encounter_id.as_str()))
        .collect();
    timeline.sort_unstable();

    let tol = chrono::Duration::days(spec.match_tolerance_days);
    let draws: Vec<Vec<(String, NaiveDate)>> = cases
        .par_iter()
        .map(|case| {
            let lo = timeline.partition_point(|e| e.0 < case.prediction_point - tol);
            let hi = timeline.partition_point(|e| e.0 <= case.prediction_point + tol);
            // eligible encounters grouped per patient, patients in id order
            let mut eligible: Vec<(&str, NaiveDate, &str)> =
                timeline[lo..hi].iter().map(|&(d, p, e)| (p, d, e)).collect();
            eligible.sort_unstable();
            let mut groups: Vec<&[(&str, NaiveDate, &str)]> = Vec::new();
            let mut start = 0;
            for i in 1..=eligible.len() {
                if i == eligible.len() || eligible[i].0 != eligible[start].0 {
                    groups.push(&eligible[start..i]);
                    start = i;
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed ^ fnv1a(case.patient_id.as_bytes()));
            let k = spec.controls_per_case.min(groups.len());
            index::sample(&mut rng, groups.len(), k)
                .into_iter()
                .map(|g| {
                    let encounters = groups[g];
                    let pick = encounters[rng.gen_range(0..encounters.len())];
                    (pick.0.to_string(), pick.1)
                })
                .collect()
        })
        .collect();

    let mut seen = HashSet::new();
    let mut controls = Vec::new();
    for (case, drawn) in cases.iter().zip(&draws) {
        for (pid, date) in drawn {
            if seen.insert(pid.clone()) {
                controls.push(CohortAssignment {
                    patient_id: pid.clone(),
                    label: Label::Control,
                    index_date: None,
                    prediction_point: *date,
                    window_years: spec.window_years,
                    anchor: Some(MatchAnchor {
                        patient_id: case.patient_id.clone(),
                        prediction_point: case.prediction_point,
                    }),
                });
            }
        }
    }
    MatchedControls {
        controls,
        drawn_per_case: draws.iter().map(Vec::len).collect(),
    }
}

/// `true` when the member has every required series observed on or before
/// its prediction point.
pub fn is_complete_case(records: &ClinicalRecordSet, member: &CohortAssignment, panel: &PanelRequirement) -> bool {
    let ev = records.events(&member.patient_id);
    let pp = member.prediction_point;
    panel
        .loincs
        .iter()
        .all(|loinc| ev.labs.iter().any(|l| l.date <= pp && &l.loinc == loinc))
        && panel
            .vitals
            .iter()
            .all(|kind| ev.vitals.iter().any(|v| v.date <= pp && v.kind == *kind))
}

pub fn complete_case_filter(
    records: &ClinicalRecordSet,
    members: &[CohortAssignment],
    panel: &PanelRequirement,
) -> Vec<CohortAssignment> {
    members
        .iter()
        .filter(|m| is_complete_case(records, m, panel))
        .cloned()
        .collect()
}

/// Full cohort derivation. Members are returned cases first, then controls,
/// each group sorted by patient id.
pub fn build_cohort(records: &ClinicalRecordSet, spec: &CohortSpec) -> Result<(Vec<CohortAssignment>, CohortReport)> {
    spec.validate()?;
    let fatty = identify_fatty_liver(records, spec);
    if fatty.is_empty() {
        return Err(Error::EmptyCohort("fatty-liver identification"));
    }
    let cases = lc_cases(records, spec, &fatty);
    if cases.is_empty() {
        return Err(Error::EmptyCohort("cirrhosis cases"));
    }
    let matched = sample_matched_controls(records, spec, &cases);
    let panel = PanelRequirement::default();
    let mut kept_cases = complete_case_filter(records, &cases, &panel);
    let mut kept_controls = complete_case_filter(records, &matched.controls, &panel);
    if kept_cases.is_empty() {
        return Err(Error::EmptyCohort("complete-case cases"));
    }
    kept_cases.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    kept_controls.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));

    let report = CohortReport {
        window_years: spec.window_years,
        fatty_liver_total: fatty.len(),
        lc_patients: cases.len(),
        non_lc_patients: fatty.len() - cases.len(),
        matched_controls: matched.controls.len(),
        cases_without_controls: matched.drawn_per_case.iter().filter(|&&n| n == 0).count(),
        max_controls_per_case_before_dedup: matched.drawn_per_case.iter().copied().max().unwrap_or(0),
        complete_case_cases: kept_cases.len(),
        complete_case_controls: kept_controls.len(),
    };
    kept_cases.extend(kept_controls);
    Ok((kept_cases, report))
}

const COHORT_HEADER: [&str; 7] = [
    "patient_id",
    "label",
    "index_date",
    "prediction_point",
    "window_years",
    "anchor_patient_id",
    "anchor_prediction_point",
];

pub fn write_cohort_csv(path: &Path, members: &[CohortAssignment], comment: Option<&str>) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    if let Some(c) = comment {
        writeln!(file, "# {c}").map_err(|e| Error::io(path, e))?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(COHORT_HEADER)?;
    for m in members {
        let opt = |d: Option<NaiveDate>| d.map(|d| d.to_string()).unwrap_or_default();
        w.write_record([
            m.patient_id.clone(),
            m.label.as_str().to_string(),
            opt(m.index_date),
            m.prediction_point.to_string(),
            m.window_years.to_string(),
            m.anchor.as_ref().map(|a| a.patient_id.clone()).unwrap_or_default(),
            opt(m.anchor.as_ref().map(|a| a.prediction_point)),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_cohort_csv(path: &Path) -> Result<Vec<CohortAssignment>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let label = path.display().to_string();
    let headers = r.headers()?.clone();
    for (i, col) in COHORT_HEADER.iter().take(5).enumerate() {
        if headers.get(i) != Some(col) {
            return Err(Error::MissingColumn {
                file: label,
                column: col.to_string(),
            });
        }
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let bad = |what: &str| Error::row(label.clone(), line, what);
        let date = |i: usize| -> Result<Option<NaiveDate>> {
            match field(i) {
                "" => Ok(None),
                t => parse_date(t).map(Some).ok_or_else(|| bad("unparseable date")),
            }
        };
        let member_label = match field(1) {
            "case" => Label::Case,
            "control" => Label::Control,
            _ => return Err(bad("label must be case or control")),
        };
        let anchor = match (field(5), date(6)?) {
            ("", _) => None,
            (id, Some(pp)) => Some(MatchAnchor {
                patient_id: id.to_string(),
                prediction_point: pp,
            }),
            (_, None) => return Err(bad("anchor without prediction point")),
        };
        out.push(CohortAssignment {
            patient_id: field(0).to_string(),
            label: member_label,
            index_date: date(2)?,
            prediction_point: date(3)?.ok_or_else(|| bad("missing prediction_point"))?,
            window_years: field(4).parse().map_err(|_| bad("window_years is not an integer"))?,
            anchor,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ehr::{DiagnosisEvent, Encounter, Gender, IcdCode, LabResult, PatientRecord, VitalSign};

    fn d(s: &str) -> NaiveDate {
        parse_date(s).unwrap()
    }

    #[derive(Default)]
    struct Builder {
        patients: Vec<PatientRecord>,
        encounters: Vec<Encounter>,
        diagnoses: Vec<DiagnosisEvent>,
        labs: Vec<LabResult>,
        vitals: Vec<VitalSign>,
    }

    impl Builder {
        fn patient(&mut self, id: &str) -> &mut Self {
            self.patients.push(PatientRecord {
                patient_id: id.into(),
                birth_date: d("1960-01-01"),
                gender: Gender::Male,
                race: "White".into(),
                marital_status: "Single".into(),
                county_fips: None,
            });
            self
        }

        fn dx(&mut self, id: &str, date: &str, v: IcdVersion, code: &str) -> &mut Self {
            self.diagnoses.push(DiagnosisEvent {
                patient_id: id.into(),
                date: d(date),
                code: IcdCode::new(code, v).unwrap(),
            });
            self
        }

        fn enc(&mut self, id: &str, date: &str) -> &mut Self {
            let n = self.encounters.len();
            self.encounters.push(Encounter {
                encounter_id: format!("e{n}"),
                patient_id: id.into(),
                date: d(date),
            });
            self
        }

        fn panel(&mut self, id: &str, date: &str) -> &mut Self {
            for a in LAB_PANEL {
                self.labs.push(LabResult {
                    patient_id: id.into(),
                    date: d(date),
                    loinc: a.loinc.into(),
                    value: 1.0,
                });
            }
            for kind in VitalKind::ALL {
                self.vitals.push(VitalSign {
                    patient_id: id.into(),
                    date: d(date),
                    kind,
                    value: 1.0,
                });
            }
            self
        }

        fn build(&mut self) -> ClinicalRecordSet {
            ClinicalRecordSet::new(
                std::mem::take(&mut self.patients),
                std::mem::take(&mut self.encounters),
                std::mem::take(&mut self.diagnoses),
                std::mem::take(&mut self.labs),
                std::mem::take(&mut self.vitals),
            )
            .unwrap()
        }
    }

    #[test]
    fn fatty_liver_identification() {
        let set = Builder::default()
            .patient("a")
            .dx("a", "2015-01-01", IcdVersion::Icd10, "K76.0")
            .patient("b")
            .dx("b", "2015-01-01", IcdVersion::Icd10, "E11.9")
            .patient("c")
            .dx("c", "2012-01-01", IcdVersion::Icd9, "571.8")
            .build();
        let fatty = identify_fatty_liver(&set, &CohortSpec::default());
        assert_eq!(fatty.into_iter().collect::<Vec<_>>(), vec!["a", "c"]);
    }

    #[test]
    fn first_lc_is_min_across_versions() {
        let spec = CohortSpec::default();
        let set = Builder::default()
            .patient("a")
            .dx("a", "2016-01-02", IcdVersion::Icd10, "K70.30")
            .dx("a", "2015-06-10", IcdVersion::Icd10, "K70.30")
            .patient("b")
            .dx("b", "2014-01-01", IcdVersion::Icd9, "571.2")
            .dx("b", "2013-05-05", IcdVersion::Icd10, "K74.60")
            .patient("c")
            .dx("c", "2014-01-01", IcdVersion::Icd10, "K76.0")
            .build();
        assert_eq!(first_lc_diagnosis(&set, &spec, "a"), Some(d("2015-06-10")));
        assert_eq!(first_lc_diagnosis(&set, &spec, "b"), Some(d("2013-05-05")));
        assert_eq!(first_lc_diagnosis(&set, &spec, "c"), None);
    }

    #[test]
    fn prediction_point_examples() {
        assert_eq!(prediction_point(d("2016-06-10"), 1), d("2015-06-10"));
        assert_eq!(prediction_point(d("2016-02-29"), 1), d("2015-02-28"));
        assert_eq!(prediction_point(d("2018-03-01"), 3), d("2015-03-01"));
        assert_eq!(prediction_point(d("2016-02-29"), 4), d("2012-02-29"));
    }

    fn case_at(id: &str, pp: &str) -> CohortAssignment {
        CohortAssignment {
            patient_id: id.into(),
            label: Label::Case,
            index_date: Some(shift_years(d(pp), 1)),
            prediction_point: d(pp),
            window_years: 1,
            anchor: None,
        }
    }

    #[test]
    fn tolerance_boundary_is_inclusive() {
        let spec = CohortSpec::default();
        let set = Builder::default()
            .patient("x")
            .dx("x", "2010-01-01", IcdVersion::Icd10, "K76.0")
            .enc("x", "2015-06-03")
            .patient("y")
            .dx("y", "2010-01-01", IcdVersion::Icd10, "K76.0")
            .enc("y", "2015-06-18")
            .build();
        let m = sample_matched_controls(&set, &spec, &[case_at("case", "2015-06-10")]);
        assert_eq!(m.controls.len(), 1);
        assert_eq!(m.controls[0].patient_id, "x");
        assert_eq!(m.controls[0].prediction_point, d("2015-06-03"));
        assert_eq!(m.controls[0].anchor.as_ref().unwrap().patient_id, "case");
    }

    #[test]
    fn shared_control_goes_to_first_case_and_short_pools_are_taken_whole() {
        let spec = CohortSpec::default();
        let mut b = Builder::default();
        for id in ["p1", "p2", "p3"] {
            b.patient(id).dx(id, "2010-01-01", IcdVersion::Icd10, "K76.0").enc(id, "2015-06-10");
        }
        let set = b.build();
        let cases = [case_at("c1", "2015-06-09"), case_at("c2", "2015-06-11")];
        let m = sample_matched_controls(&set, &spec, &cases);
        assert_eq!(m.drawn_per_case, vec![3, 3]);
        assert_eq!(m.controls.len(), 3);
        assert!(m.controls.iter().all(|c| c.anchor.as_ref().unwrap().patient_id == "c1"));
    }

    #[test]
    fn controls_must_never_have_cirrhosis() {
        let spec = CohortSpec::default();
        let set = Builder::default()
            .patient("late")
            .dx("late", "2010-01-01", IcdVersion::Icd10, "K76.0")
            .dx("late", "2020-01-01", IcdVersion::Icd10, "K74.60")
            .enc("late", "2015-06-10")
            .build();
        let m = sample_matched_controls(&set, &spec, &[case_at("c", "2015-06-10")]);
        assert!(m.controls.is_empty());
    }

    #[test]
    fn complete_case_rules() {
        let mut b = Builder::default();
        b.patient("full").panel("full", "2015-01-01");
        b.patient("late").panel("late", "2015-01-01");
        b.patient("noplt").panel("noplt", "2015-01-01");
        let mut set = b.build();
        // rebuild with modifications: drop platelets for "noplt", push ALT after pp for "late"
        let labs: Vec<LabResult> = set
            .labs()
            .iter()
            .filter(|l| !(l.patient_id == "noplt" && l.loinc == "26515-7"))
            .map(|l| {
                let mut l = l.clone();
                if l.patient_id == "late" && l.loinc == "1742-6" {
                    l.date = d("2016-01-01");
                }
                l
            })
            .collect();
        set = ClinicalRecordSet::new(
            set.patients().to_vec(),
            vec![],
            vec![],
            labs,
            set.vitals().to_vec(),
        )
        .unwrap();
        let members: Vec<CohortAssignment> = ["full", "late", "noplt"].iter().map(|id| case_at(id, "2015-06-01")).collect();
        let kept = complete_case_filter(&set, &members, &PanelRequirement::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].patient_id, "full");
    }

    #[test]
    fn build_keeps_case_without_controls() {
        let spec = CohortSpec {
            match_tolerance_days: 0,
            ..CohortSpec::default()
        };
        let set = Builder::default()
            .patient("case")
            .dx("case", "2012-01-01", IcdVersion::Icd10, "K76.0")
            .dx("case", "2016-06-10", IcdVersion::Icd10, "K74.60")
            .dx("case", "2016-06-10", IcdVersion::Icd10, "K70.30")
            .panel("case", "2015-01-01")
            .patient("ctl")
            .dx("ctl", "2012-01-01", IcdVersion::Icd10, "K76.0")
            .enc("ctl", "2015-06-11")
            .panel("ctl", "2015-01-01")
            .build();
        let (members, report) = build_cohort(&set, &spec).unwrap();
        assert_eq!(members.len(), 1);
        assert_eq!(members[0].index_date, Some(d("2016-06-10")));
        assert_eq!(members[0].prediction_point, d("2015-06-10"));
        assert_eq!(report.lc_patients, 1);
        assert_eq!(report.matched_controls, 0);
        assert_eq!(report.cases_without_controls, 1);
        assert_eq!(report.complete_case_controls, 0);
    }

    #[test]
    fn empty_stages_are_errors() {
        let set = Builder::default().patient("a").build();
        assert!(matches!(
            build_cohort(&set, &CohortSpec::default()),
            Err(Error::EmptyCohort("fatty-liver identification"))
        ));
    }

    #[test]
    fn cohort_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cohort.csv");
        let mut ctl = case_at("k", "2015-06-03");
        ctl.label = Label::Control;
        ctl.index_date = None;
        ctl.anchor = Some(MatchAnchor {
            patient_id: "c".into(),
            prediction_point: d("2015-06-10"),
        });
        let members = vec![case_at("c", "2015-06-10"), ctl];
        write_cohort_csv(&path, &members, Some("tool=test")).unwrap();
        assert_eq!(read_cohort_csv(&path).unwrap(), members);
    }
}
