//! Code-system services: CCS diagnosis grouping, the Quan–Charlson comorbidity
//! index and USDA rural-urban continuum codes.
//!
//! Mapping content is data. Small default tables are compiled in; full
//! exports in the same CSV layouts can be loaded from disk.

mod ccs;
mod charlson;
mod rucc;

use std::path::{Path, PathBuf};

pub use ccs::{ccs_lookup, CcsCategory, CcsEntry, CcsMap};
pub use charlson::{cci_for_diagnoses, CharlsonCategory, CharlsonEntry, CharlsonMap};
pub use rucc::{rucc_lookup, CountyIndex, RuccClass, RuccTable, RUCC_LABELS};

use crate::{Error, Result};

pub const BUILTIN_CCS_CSV: &str = include_str!("../../data/ccs_map.csv");
pub const BUILTIN_CHARLSON_CSV: &str = include_str!("../../data/charlson_map.csv");
pub const BUILTIN_RUCC_CSV: &str = include_str!("../../data/rucc.csv");

/// The three lookup tables used by cohort and feature construction.
#[derive(Debug, Clone)]
pub struct Terminology {
    pub ccs: CcsMap,
    pub charlson: CharlsonMap,
    pub rucc: RuccTable,
}

/// Optional on-disk replacements for the built-in tables.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TerminologyPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ccs: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charlson: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rucc: Option<PathBuf>,
}

impl Terminology {
    pub fn builtin() -> Self {
        Self {
            ccs: CcsMap::from_csv_str(BUILTIN_CCS_CSV, "builtin:ccs_map.csv").expect("builtin CCS map"),
            charlson: CharlsonMap::from_csv_str(BUILTIN_CHARLSON_CSV, "builtin:charlson_map.csv")
                .expect("builtin Charlson map"),
            rucc: RuccTable::from_csv_str(BUILTIN_RUCC_CSV, "builtin:rucc.csv").expect("builtin RUCC table"),
        }
    }

    pub fn load(paths: &TerminologyPaths) -> Result<Self> {
        let builtin = Self::builtin();
        Ok(Self {
            ccs: match &paths.ccs {
                Some(p) => CcsMap::from_csv_str(&read(p)?, &p.display().to_string())?,
                None => builtin.ccs,
            },
            charlson: match &paths.charlson {
                Some(p) => CharlsonMap::from_csv_str(&read(p)?, &p.display().to_string())?,
                None => builtin.charlson,
            },
            rucc: match &paths.rucc {
                Some(p) => RuccTable::from_csv_str(&read(p)?, &p.display().to_string())?,
                None => builtin.rucc,
            },
        })
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn mapping_error(file: &str, reason: impl Into<String>) -> Error {
    Error::Mapping {
        file: file.to_string(),
        reason: reason.into(),
    }
}

/// Reads a mapping CSV into rows of the requested columns, with line numbers.
/// Columns in `optional` read as empty strings when the header lacks them.
pub(crate) fn csv_rows(
    text: &str,
    file: &str,
    required: &[&str],
    optional: &[&str],
) -> Result<Vec<(u64, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut idx = required
        .iter()
        .map(|&name| {
            find(name).map(Some).ok_or_else(|| Error::MissingColumn {
                file: file.to_string(),
                column: name.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    idx.extend(optional.iter().map(|&name| find(name)));
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let fields = idx
            .iter()
            .map(|i| i.and_then(|i| record.get(i)).unwrap_or("").trim().to_string())
            .collect();
        out.push((line, fields));
    }
    Ok(out)
}
