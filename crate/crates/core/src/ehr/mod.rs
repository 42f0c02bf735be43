//! Domain types for EHR extracts and their CSV ingestion.

mod icd;
mod io;

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use icd::{code_matches_pattern, normalize_icd, normalize_pattern, CodePattern, IcdCode, IcdVersion};
pub use io::{load_record_set, write_record_set, LoadOptions, LoadReport, RecordPaths, RejectedRow};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    Female,
    Male,
    Unknown,
}

impl Gender {
    pub const ALL: [Gender; 3] = [Gender::Female, Gender::Male, Gender::Unknown];

    /// Lenient parse: anything unrecognized is `Unknown`.
    pub fn parse(text: &str) -> Self {
        match text.trim().to_ascii_lowercase().as_str() {
            "female" | "f" => Gender::Female,
            "male" | "m" => Gender::Male,
            _ => Gender::Unknown,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "Female",
            Gender::Male => "Male",
            Gender::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VitalKind {
    #[serde(rename = "SBP")]
    Sbp,
    #[serde(rename = "DBP")]
    Dbp,
    #[serde(rename = "BMI")]
    Bmi,
}

impl VitalKind {
    pub const ALL: [VitalKind; 3] = [VitalKind::Bmi, VitalKind::Dbp, VitalKind::Sbp];

    pub fn parse(text: &str) -> Option<Self> {
        match text.trim() {
            "SBP" => Some(VitalKind::Sbp),
            "DBP" => Some(VitalKind::Dbp),
            "BMI" => Some(VitalKind::Bmi),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VitalKind::Sbp => "SBP",
            VitalKind::Dbp => "DBP",
            VitalKind::Bmi => "BMI",
        }
    }
}

/// One analyte of the laboratory panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabAnalyte {
    pub loinc: &'static str,
    pub name: &'static str,
}

pub const ALT: LabAnalyte = LabAnalyte { loinc: "1742-6", name: "ALT" };
pub const ALBUMIN: LabAnalyte = LabAnalyte { loinc: "1751-7", name: "Albumin" };
pub const AST: LabAnalyte = LabAnalyte { loinc: "1920-8", name: "AST" };
pub const ALP: LabAnalyte = LabAnalyte { loinc: "6768-6", name: "ALP" };
pub const BILIRUBIN: LabAnalyte = LabAnalyte { loinc: "1975-2", name: "Bilirubin" };
pub const HEMOGLOBIN: LabAnalyte = LabAnalyte { loinc: "718-7", name: "Hemoglobin" };
pub const PLATELETS: LabAnalyte = LabAnalyte { loinc: "26515-7", name: "Platelets" };
pub const PROTEIN: LabAnalyte = LabAnalyte { loinc: "2885-2", name: "Protein" };
pub const PT: LabAnalyte = LabAnalyte { loinc: "5902-2", name: "PT" };

/// The nine-analyte panel, in extraction-table order.
pub const LAB_PANEL: [LabAnalyte; 9] = [ALT, ALBUMIN, AST, ALP, BILIRUBIN, HEMOGLOBIN, PLATELETS, PROTEIN, PT];

pub fn lab_by_loinc(loinc: &str) -> Option<LabAnalyte> {
    LAB_PANEL.iter().copied().find(|a| a.loinc == loinc)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatientRecord {
    pub patient_id: String,
    pub birth_date: NaiveDate,
    pub gender: Gender,
    pub race: String,
    pub marital_status: String,
    pub county_fips: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encounter {
    pub encounter_id: String,
    pub patient_id: String,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagnosisEvent {
    pub patient_id: String,
    pub date: NaiveDate,
    pub code: IcdCode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabResult {
    pub patient_id: String,
    pub date: NaiveDate,
    pub loinc: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VitalSign {
    pub patient_id: String,
    pub date: NaiveDate,
    pub kind: VitalKind,
    pub value: f64,
}

/// All events of one patient, each slice sorted by date.
#[derive(Debug, Clone, Copy)]
pub struct PatientEvents<'a> {
    pub encounters: &'a [Encounter],
    pub diagnoses: &'a [DiagnosisEvent],
    pub labs: &'a [LabResult],
    pub vitals: &'a [VitalSign],
}

/// An immutable, validated extract. Every collection is sorted by
/// `(patient_id, date)` with a total tie-break, so two sets loaded from the
/// same rows in different order compare equal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClinicalRecordSet {
    patients: Vec<PatientRecord>,
    encounters: Vec<Encounter>,
    diagnoses: Vec<DiagnosisEvent>,
    labs: Vec<LabResult>,
    vitals: Vec<VitalSign>,
}

impl ClinicalRecordSet {
    pub fn new(
        mut patients: Vec<PatientRecord>,
        mut encounters: Vec<Encounter>,
        mut diagnoses: Vec<DiagnosisEvent>,
        mut labs: Vec<LabResult>,
        mut vitals: Vec<VitalSign>,
    ) -> Result<Self> {
        patients.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
        if let Some(w) = patients.windows(2).find(|w| w[0].patient_id == w[1].patient_id) {
            return Err(Error::DuplicatePatient(w[0].patient_id.clone()));
        }
        let ids: HashSet<&str> = patients.iter().map(|p| p.patient_id.as_str()).collect();
        let check = |file: &str, id: &str| {
            if ids.contains(id) {
                Ok(())
            } else {
                Err(Error::DanglingPatient {
                    file: file.to_string(),
                    line: 0,
                    patient_id: id.to_string(),
                })
            }
        };
        encounters.iter().try_for_each(|e| check("encounters", &e.patient_id))?;
        diagnoses.iter().try_for_each(|d| check("diagnoses", &d.patient_id))?;
        labs.iter().try_for_each(|l| check("labs", &l.patient_id))?;
        vitals.iter().try_for_each(|v| check("vitals", &v.patient_id))?;

        encounters.sort_by(|a, b| {
            (&a.patient_id, a.date, &a.encounter_id).cmp(&(&b.patient_id, b.date, &b.encounter_id))
        });
        diagnoses.sort_by(|a, b| (&a.patient_id, a.date, &a.code).cmp(&(&b.patient_id, b.date, &b.code)));
        labs.sort_by(|a, b| {
            (&a.patient_id, a.date, &a.loinc)
                .cmp(&(&b.patient_id, b.date, &b.loinc))
                .then(a.value.total_cmp(&b.value))
        });
        vitals.sort_by(|a, b| {
            (&a.patient_id, a.date, a.kind)
                .cmp(&(&b.patient_id, b.date, b.kind))
                .then(a.value.total_cmp(&b.value))
        });
        Ok(Self {
            patients,
            encounters,
            diagnoses,
            labs,
            vitals,
        })
    }

    pub fn patients(&self) -> &[PatientRecord] {
        &self.patients
    }

    pub fn encounters(&self) -> &[Encounter] {
        &self.encounters
    }

    pub fn diagnoses(&self) -> &[DiagnosisEvent] {
        &self.diagnoses
    }

    pub fn labs(&self) -> &[LabResult] {
        &self.labs
    }

    pub fn vitals(&self) -> &[VitalSign] {
        &self.vitals
    }

    pub fn patient(&self, patient_id: &str) -> Option<&PatientRecord> {
        self.patients
            .binary_search_by(|p| p.patient_id.as_str().cmp(patient_id))
            .ok()
            .map(|i| &self.patients[i])
    }

    pub fn events(&self, patient_id: &str) -> PatientEvents<'_> {
        PatientEvents {
            encounters: &self.encounters[id_range(&self.encounters, patient_id, |e| &e.patient_id)],
            diagnoses: &self.diagnoses[id_range(&self.diagnoses, patient_id, |e| &e.patient_id)],
            labs: &self.labs[id_range(&self.labs, patient_id, |e| &e.patient_id)],
            vitals: &self.vitals[id_range(&self.vitals, patient_id, |e| &e.patient_id)],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }
}

fn id_range<T>(items: &[T], id: &str, key: impl Fn(&T) -> &String) -> Range<usize> {
    let start = items.partition_point(|e| key(e).as_str() < id);
    let end = items.partition_point(|e| key(e).as_str() <= id);
    start..end
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn patient(id: &str) -> PatientRecord {
        PatientRecord {
            patient_id: id.into(),
            birth_date: date("1960-01-01"),
            gender: Gender::Female,
            race: "White".into(),
            marital_status: "Married".into(),
            county_fips: None,
        }
    }

    #[test]
    fn events_are_sorted_and_sliced_per_patient() {
        let enc = |id: &str, p: &str, d: &str| Encounter {
            encounter_id: id.into(),
            patient_id: p.into(),
            date: date(d),
        };
        let set = ClinicalRecordSet::new(
            vec![patient("b"), patient("a")],
            vec![enc("3", "b", "2015-01-01"), enc("2", "a", "2016-01-01"), enc("1", "a", "2014-01-01")],
            vec![],
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(set.patients()[0].patient_id, "a");
        let a = set.events("a");
        assert_eq!(a.encounters.len(), 2);
        assert!(a.encounters[0].date < a.encounters[1].date);
        assert_eq!(set.events("b").encounters.len(), 1);
        assert!(set.events("zzz").encounters.is_empty());
    }

    #[test]
    fn duplicate_and_dangling_ids_are_rejected() {
        assert!(matches!(
            ClinicalRecordSet::new(vec![patient("a"), patient("a")], vec![], vec![], vec![], vec![]),
            Err(Error::DuplicatePatient(_))
        ));
        let lab = LabResult {
            patient_id: "ghost".into(),
            date: date("2015-01-01"),
            loinc: ALT.loinc.into(),
            value: 1.0,
        };
        assert!(matches!(
            ClinicalRecordSet::new(vec![patient("a")], vec![], vec![], vec![lab], vec![]),
            Err(Error::DanglingPatient { .. })
        ));
    }
}
