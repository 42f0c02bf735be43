use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use csv::StringRecord;

use super::{
    lab_by_loinc, ClinicalRecordSet, DiagnosisEvent, Encounter, Gender, IcdVersion, LabResult,
    PatientRecord, VitalKind, VitalSign,
};
use crate::ehr::normalize_icd;
use crate::util::parse_date;
use crate::{Error, Result};

/// Locations of the five extract tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordPaths {
    pub patients: PathBuf,
    pub encounters: PathBuf,
    pub diagnoses: PathBuf,
    pub labs: PathBuf,
    pub vitals: PathBuf,
}

impl RecordPaths {
    /// The conventional file names inside one directory.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            patients: dir.join("patients.csv"),
            encounters: dir.join("encounters.csv"),
            diagnoses: dir.join("diagnoses.csv"),
            labs: dir.join("labs.csv"),
            vitals: dir.join("vitals.csv"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Skip and report bad rows instead of failing on the first one.
    pub lenient: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    pub file: String,
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub rejected: Vec<RejectedRow>,
}

struct Table {
    label: String,
    reader: csv::Reader<File>,
    columns: Vec<usize>,
}

impl Table {
    fn open(path: &Path, required: &[&str]) -> Result<Self> {
        let label = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
        let headers = reader.headers()?.clone();
        let columns = required
            .iter()
            .map(|&name| {
                headers
                    .iter()
                    .position(|h| h.trim() == name)
                    .ok_or_else(|| Error::MissingColumn {
                        file: label.clone(),
                        column: name.to_string(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { label, reader, columns })
    }

    /// Parses every data row; rows failing `parse` are rejected (lenient) or
    /// abort the load (strict).
    fn rows<T>(
        mut self,
        opts: LoadOptions,
        report: &mut LoadReport,
        mut parse: impl FnMut(&[&str]) -> std::result::Result<T, String>,
    ) -> Result<(String, Vec<(u64, T)>)> {
        let mut out = Vec::new();
        let mut record = StringRecord::new();
        loop {
            let more = match self.reader.read_record(&mut record) {
                Ok(more) => more,
                Err(e) => {
                    let line = e.position().map_or(0, |p| p.line());
                    reject(&self.label, line, e.to_string(), opts, report)?;
                    continue;
                }
            };
            if !more {
                break;
            }
            let line = record.position().map_or(0, |p| p.line());
            let fields: Vec<&str> = self.columns.iter().map(|&i| record.get(i).unwrap_or("")).collect();
            match parse(&fields) {
                Ok(row) => out.push((line, row)),
                Err(reason) => reject(&self.label, line, reason, opts, report)?,
            }
        }
        Ok((self.label, out))
    }
}

fn reject(file: &str, line: u64, reason: String, opts: LoadOptions, report: &mut LoadReport) -> Result<()> {
    if opts.lenient {
        report.rejected.push(RejectedRow {
            file: file.to_string(),
            line,
            reason,
        });
        Ok(())
    } else {
        Err(Error::row(file, line, reason))
    }
}

fn date_field(text: &str, column: &str) -> std::result::Result<chrono::NaiveDate, String> {
    parse_date(text).ok_or_else(|| format!("unparseable {column} {text:?}"))
}

fn value_field(text: &str) -> std::result::Result<f64, String> {
    match text.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("unparseable value {text:?}")),
    }
}

fn nonempty(text: &str, column: &str) -> std::result::Result<String, String> {
    let t = text.trim();
    if t.is_empty() {
        Err(format!("empty {column}"))
    } else {
        Ok(t.to_string())
    }
}

/// Loads and validates the five tables.
///
/// Strict mode fails on the first bad row. Lenient mode skips bad rows and
/// dangling patient references, listing each in the returned report.
pub fn load_record_set(paths: &RecordPaths, opts: LoadOptions) -> Result<(ClinicalRecordSet, LoadReport)> {
    let mut report = LoadReport::default();

    let (_, patients) = Table::open(
        &paths.patients,
        &["patient_id", "birth_date", "gender", "race", "marital_status", "county_fips"],
    )?
    .rows(opts, &mut report, |f| {
        let county = f[5].trim();
        if !county.is_empty() && (county.len() != 5 || !county.chars().all(|c| c.is_ascii_digit())) {
            return Err(format!("county_fips {county:?} is not a 5-digit code"));
        }
        Ok(PatientRecord {
            patient_id: nonempty(f[0], "patient_id")?,
            birth_date: date_field(f[1], "birth_date")?,
            gender: Gender::parse(f[2]),
            race: label_or_unknown(f[3]),
            marital_status: label_or_unknown(f[4]),
            county_fips: (!county.is_empty()).then(|| county.to_string()),
        })
    })?;
    let mut patients: Vec<PatientRecord> = patients.into_iter().map(|(_, p)| p).collect();
    if opts.lenient {
        let mut seen = HashSet::new();
        patients.retain(|p| {
            let fresh = seen.insert(p.patient_id.clone());
            if !fresh {
                report.rejected.push(RejectedRow {
                    file: paths.patients.display().to_string(),
                    line: 0,
                    reason: format!("duplicate patient_id {:?}", p.patient_id),
                });
            }
            fresh
        });
    }
    let ids: HashSet<String> = patients.iter().map(|p| p.patient_id.clone()).collect();

    let encounters = Table::open(&paths.encounters, &["encounter_id", "patient_id", "date"])?.rows(
        opts,
        &mut report,
        |f| {
            Ok(Encounter {
                encounter_id: nonempty(f[0], "encounter_id")?,
                patient_id: nonempty(f[1], "patient_id")?,
                date: date_field(f[2], "date")?,
            })
        },
    )?;
    let encounters = keep_known(encounters, &ids, opts, &mut report, |e| &e.patient_id)?;

    let diagnoses = Table::open(&paths.diagnoses, &["patient_id", "date", "icd_version", "code"])?.rows(
        opts,
        &mut report,
        |f| {
            let version = IcdVersion::parse(f[2]).ok_or_else(|| format!("icd_version {:?} is not 9 or 10", f[2]))?;
            Ok(DiagnosisEvent {
                patient_id: nonempty(f[0], "patient_id")?,
                date: date_field(f[1], "date")?,
                code: normalize_icd(f[3], version).map_err(|e| e.to_string())?,
            })
        },
    )?;
    let diagnoses = keep_known(diagnoses, &ids, opts, &mut report, |d| &d.patient_id)?;

    let labs = Table::open(&paths.labs, &["patient_id", "date", "loinc", "value"])?.rows(opts, &mut report, |f| {
        let loinc = f[2].trim();
        if lab_by_loinc(loinc).is_none() {
            return Err(format!("loinc {loinc:?} is not in the lab panel"));
        }
        Ok(LabResult {
            patient_id: nonempty(f[0], "patient_id")?,
            date: date_field(f[1], "date")?,
            loinc: loinc.to_string(),
            value: value_field(f[3])?,
        })
    })?;
    let labs = keep_known(labs, &ids, opts, &mut report, |l| &l.patient_id)?;

    let vitals = Table::open(&paths.vitals, &["patient_id", "date", "kind", "value"])?.rows(opts, &mut report, |f| {
        let kind = VitalKind::parse(f[2]).ok_or_else(|| format!("vital kind {:?} is not SBP, DBP or BMI", f[2]))?;
        let value = value_field(f[3])?;
        if value <= 0.0 {
            return Err(format!("vital value {value} is not positive"));
        }
        Ok(VitalSign {
            patient_id: nonempty(f[0], "patient_id")?,
            date: date_field(f[1], "date")?,
            kind,
            value,
        })
    })?;
    let vitals = keep_known(vitals, &ids, opts, &mut report, |v| &v.patient_id)?;

    let set = ClinicalRecordSet::new(patients, encounters, diagnoses, labs, vitals)?;
    Ok((set, report))
}

fn label_or_unknown(text: &str) -> String {
    let t = text.trim();
    if t.is_empty() {
        "Unknown".to_string()
    } else {
        t.to_string()
    }
}

fn keep_known<T>(
    (file, rows): (String, Vec<(u64, T)>),
    ids: &HashSet<String>,
    opts: LoadOptions,
    report: &mut LoadReport,
    key: impl Fn(&T) -> &String,
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        let id = key(&row);
        if ids.contains(id) {
            out.push(row);
        } else if opts.lenient {
            report.rejected.push(RejectedRow {
                file: file.clone(),
                line,
                reason: format!("patient {id:?} does not exist"),
            });
        } else {
            return Err(Error::DanglingPatient {
                file,
                line,
                patient_id: id.clone(),
            });
        }
    }
    Ok(out)
}

fn create(path: &Path, comment: Option<&str>) -> Result<csv::Writer<File>> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    if let Some(comment) = comment {
        writeln!(file, "# {comment}").map_err(|e| Error::io(path, e))?;
    }
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut writer: csv::Writer<File>, path: &Path) -> Result<()> {
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Writes the five tables into `dir` using the conventional file names.
/// `comment`, when given, becomes a leading `#` line in every file.
pub fn write_record_set(set: &ClinicalRecordSet, dir: &Path, comment: Option<&str>) -> Result<RecordPaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = RecordPaths::in_dir(dir);

    let mut w = create(&paths.patients, comment)?;
    w.write_record(["patient_id", "birth_date", "gender", "race", "marital_status", "county_fips"])?;
    for p in set.patients() {
        w.write_record([
            p.patient_id.as_str(),
            &p.birth_date.to_string(),
            p.gender.as_str(),
            &p.race,
            &p.marital_status,
            p.county_fips.as_deref().unwrap_or(""),
        ])?;
    }
    finish(w, &paths.patients)?;

    let mut w = create(&paths.encounters, comment)?;
    w.write_record(["encounter_id", "patient_id", "date"])?;
    for e in set.encounters() {
        w.write_record([e.encounter_id.as_str(), &e.patient_id, &e.date.to_string()])?;
    }
    finish(w, &paths.encounters)?;

    let mut w = create(&paths.diagnoses, comment)?;
    w.write_record(["patient_id", "date", "icd_version", "code"])?;
    for d in set.diagnoses() {
        w.write_record([
            d.patient_id.as_str(),
            &d.date.to_string(),
            &d.code.version.to_string(),
            &d.code.code,
        ])?;
    }
    finish(w, &paths.diagnoses)?;

    let mut w = create(&paths.labs, comment)?;
    w.write_record(["patient_id", "date", "loinc", "value"])?;
    for l in set.labs() {
        w.write_record([l.patient_id.as_str(), &l.date.to_string(), &l.loinc, &l.value.to_string()])?;
    }
    finish(w, &paths.labs)?;

    let mut w = create(&paths.vitals, comment)?;
    w.write_record(["patient_id", "date", "kind", "value"])?;
    for v in set.vitals() {
        w.write_record([v.patient_id.as_str(), &v.date.to_string(), v.kind.as_str(), &v.value.to_string()])?;
    }
    finish(w, &paths.vitals)?;

    Ok(paths)
}
