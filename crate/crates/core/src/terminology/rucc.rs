use std::collections::HashMap;

use super::{csv_rows, mapping_error};
use crate::Result;

/// Canonical labels for RUCC codes 1 through 9.
pub const RUCC_LABELS: [&str; 9] = [
    "Metro, ≥1 million",
    "Metro, 250,000 to 1 million",
    "Metro, <250,000",
    "Nonmetro, ≥20,000, adjacent to metro",
    "Nonmetro, ≥20,000, not adjacent to metro",
    "Nonmetro, 5,000 to 20,000, adjacent to metro",
    "Nonmetro, 5,000 to 20,000, not adjacent to metro",
    "Nonmetro, <5,000, adjacent to metro",
    "Nonmetro, <5,000, not adjacent to metro",
];

/// A county's rural-urban class, `Unknown` when the county cannot be resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuccClass {
    Code(u8),
    Unknown,
}

impl RuccClass {
    pub fn label(self) -> &'static str {
        match self {
            RuccClass::Code(c) => RUCC_LABELS[usize::from(c) - 1],
            RuccClass::Unknown => "Unknown",
        }
    }

    /// The nine codes followed by `Unknown`.
    pub fn all() -> impl Iterator<Item = RuccClass> {
        (1..=9).map(RuccClass::Code).chain(std::iter::once(RuccClass::Unknown))
    }
}

/// County FIPS to RUCC code.
#[derive(Debug, Clone, Default)]
pub struct RuccTable {
    codes: HashMap<String, u8>,
}

impl RuccTable {
    pub fn new(rows: impl IntoIterator<Item = (String, u8)>) -> Result<Self> {
        let mut codes = HashMap::new();
        for (fips, code) in rows {
            if !(1..=9).contains(&code) {
                return Err(mapping_error("<memory>", format!("RUCC code {code} for {fips} outside 1..=9")));
            }
            if codes.insert(fips.clone(), code).is_some() {
                return Err(mapping_error("<memory>", format!("duplicate county {fips}")));
            }
        }
        Ok(Self { codes })
    }

    /// Parses `county_fips,rucc_code,label`. Labels are informational; lookups
    /// report the canonical label for the code.
    pub fn from_csv_str(text: &str, file: &str) -> Result<Self> {
        let rows = csv_rows(text, file, &["county_fips", "rucc_code"], &["label"])?;
        let mut parsed = Vec::with_capacity(rows.len());
        for (line, f) in rows {
            let fips = &f[0];
            if fips.len() != 5 || !fips.chars().all(|c| c.is_ascii_digit()) {
                return Err(mapping_error(file, format!("line {line}: county_fips {fips:?} is not 5 digits")));
            }
            let code: u8 = f[1]
                .parse()
                .ok()
                .filter(|c| (1..=9).contains(c))
                .ok_or_else(|| mapping_error(file, format!("line {line}: rucc_code {:?} outside 1..=9", f[1])))?;
            parsed.push((fips.clone(), code));
        }
        Self::new(parsed).map_err(|e| match e {
            crate::Error::Mapping { reason, .. } => mapping_error(file, reason),
            other => other,
        })
    }

    pub fn lookup(&self, county_fips: &str) -> Option<(u8, &'static str)> {
        self.codes
            .get(county_fips)
            .map(|&c| (c, RuccClass::Code(c).label()))
    }

    pub fn class_of(&self, county_fips: Option<&str>) -> RuccClass {
        county_fips
            .and_then(|f| self.codes.get(f))
            .map_or(RuccClass::Unknown, |&c| RuccClass::Code(c))
    }

    /// Counties carrying `code`, sorted.
    pub fn counties_with(&self, code: u8) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .codes
            .iter()
            .filter(|(_, &c)| c == code)
            .map(|(f, _)| f.as_str())
            .collect();
        out.sort_unstable();
        out
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

pub fn rucc_lookup(table: &RuccTable, county_fips: &str) -> Option<(u8, &'static str)> {
    table.lookup(county_fips)
}

/// Optional `county,state,county_fips` sidecar resolving county names to FIPS.
#[derive(Debug, Clone, Default)]
pub struct CountyIndex {
    by_name: HashMap<(String, String), String>,
}

impl CountyIndex {
    pub fn from_csv_str(text: &str, file: &str) -> Result<Self> {
        let rows = csv_rows(text, file, &["county", "state", "county_fips"], &[])?;
        let mut by_name = HashMap::new();
        for (_, f) in rows {
            by_name.insert((f[0].to_lowercase(), f[1].to_lowercase()), f[2].clone());
        }
        Ok(Self { by_name })
    }

    pub fn resolve(&self, county: &str, state: &str) -> Option<&str> {
        self.by_name
            .get(&(county.trim().to_lowercase(), state.trim().to_lowercase()))
            .map(String::as_str)
    }
}
