use std::collections::HashMap;
use std::fmt;

use super::{csv_rows, mapping_error};
use crate::ehr::{normalize_pattern, IcdCode, IcdVersion};
use crate::Result;

/// The seventeen Charlson comorbidity groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CharlsonCategory {
    MyocardialInfarction,
    CongestiveHeartFailure,
    PeripheralVascularDisease,
    CerebrovascularDisease,
    Dementia,
    ChronicPulmonaryDisease,
    RheumaticDisease,
    PepticUlcerDisease,
    MildLiverDisease,
    DiabetesWithoutComplication,
    DiabetesWithComplication,
    HemiplegiaOrParaplegia,
    RenalDisease,
    Malignancy,
    ModerateOrSevereLiverDisease,
    MetastaticSolidTumor,
    AidsHiv,
}

impl CharlsonCategory {
    pub const ALL: [CharlsonCategory; 17] = [
        Self::MyocardialInfarction,
        Self::CongestiveHeartFailure,
        Self::PeripheralVascularDisease,
        Self::CerebrovascularDisease,
        Self::Dementia,
        Self::ChronicPulmonaryDisease,
        Self::RheumaticDisease,
        Self::PepticUlcerDisease,
        Self::MildLiverDisease,
        Self::DiabetesWithoutComplication,
        Self::DiabetesWithComplication,
        Self::HemiplegiaOrParaplegia,
        Self::RenalDisease,
        Self::Malignancy,
        Self::ModerateOrSevereLiverDisease,
        Self::MetastaticSolidTumor,
        Self::AidsHiv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MyocardialInfarction => "myocardial_infarction",
            Self::CongestiveHeartFailure => "congestive_heart_failure",
            Self::PeripheralVascularDisease => "peripheral_vascular_disease",
            Self::CerebrovascularDisease => "cerebrovascular_disease",
            Self::Dementia => "dementia",
            Self::ChronicPulmonaryDisease => "chronic_pulmonary_disease",
            Self::RheumaticDisease => "rheumatic_disease",
            Self::PepticUlcerDisease => "peptic_ulcer_disease",
            Self::MildLiverDisease => "mild_liver_disease",
            Self::DiabetesWithoutComplication => "diabetes_without_complication",
            Self::DiabetesWithComplication => "diabetes_with_complication",
            Self::HemiplegiaOrParaplegia => "hemiplegia_or_paraplegia",
            Self::RenalDisease => "renal_disease",
            Self::Malignancy => "malignancy",
            Self::ModerateOrSevereLiverDisease => "moderate_or_severe_liver_disease",
            Self::MetastaticSolidTumor => "metastatic_solid_tumor",
            Self::AidsHiv => "aids_hiv",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.name() == name)
    }

    fn bit(self) -> u32 {
        1 << (self as u32)
    }
}

impl fmt::Display for CharlsonCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharlsonEntry {
    pub version: IcdVersion,
    pub prefix: String,
    pub category: CharlsonCategory,
    pub weight: u32,
    pub supersedes: Option<CharlsonCategory>,
}

/// Prefix table assigning codes to Charlson categories. A code may fall in
/// several categories; every matching prefix counts.
#[derive(Debug, Clone)]
pub struct CharlsonMap {
    by_prefix: HashMap<(IcdVersion, String), u32>,
    weights: [u32; 17],
    /// `silences[c]` is the bitmask of categories dropped when `c` is present.
    silences: [u32; 17],
    max_prefix_len: usize,
    hierarchy: bool,
}

impl CharlsonMap {
    pub fn new(entries: Vec<CharlsonEntry>) -> Result<Self> {
        Self::build(entries, "<memory>")
    }

    fn build(entries: Vec<CharlsonEntry>, file: &str) -> Result<Self> {
        let mut by_prefix: HashMap<(IcdVersion, String), u32> = HashMap::new();
        let mut weights: [Option<u32>; 17] = [None; 17];
        let mut silences = [0u32; 17];
        let mut max_prefix_len = 0;
        for e in entries {
            let i = e.category as usize;
            if !matches!(e.weight, 1 | 2 | 3 | 6) {
                return Err(mapping_error(file, format!("{}: weight {} not in {{1,2,3,6}}", e.category, e.weight)));
            }
            match weights[i] {
                Some(w) if w != e.weight => {
                    return Err(mapping_error(file, format!("{} has weights {w} and {}", e.category, e.weight)))
                }
                _ => weights[i] = Some(e.weight),
            }
            if let Some(s) = e.supersedes {
                if s == e.category {
                    return Err(mapping_error(file, format!("{} supersedes itself", e.category)));
                }
                silences[i] |= s.bit();
            }
            let prefix = e.prefix.trim_end_matches(['x', 'X']).to_string();
            if prefix.is_empty() {
                return Err(mapping_error(file, "empty code prefix"));
            }
            max_prefix_len = max_prefix_len.max(prefix.len());
            *by_prefix.entry((e.version, prefix)).or_default() |= e.category.bit();
        }
        Ok(Self {
            by_prefix,
            weights: weights.map(|w| w.unwrap_or(0)),
            silences,
            max_prefix_len,
            hierarchy: true,
        })
    }

    /// Parses `icd_version,code_prefix,category,weight[,supersedes]`.
    pub fn from_csv_str(text: &str, file: &str) -> Result<Self> {
        let rows = csv_rows(text, file, &["icd_version", "code_prefix", "category", "weight"], &["supersedes"])?;
        let mut entries = Vec::with_capacity(rows.len());
        for (line, f) in rows {
            let bad = |what: String| mapping_error(file, format!("line {line}: {what}"));
            let version = IcdVersion::parse(&f[0]).ok_or_else(|| bad("icd_version must be 9 or 10".into()))?;
            let prefix = normalize_pattern(&f[1]).map_err(|_| bad("malformed code_prefix".into()))?;
            let category = CharlsonCategory::from_name(&f[2]).ok_or_else(|| bad(format!("unknown category {:?}", f[2])))?;
            let weight = f[3].parse().map_err(|_| bad("weight is not an integer".into()))?;
            let supersedes = match f[4].as_str() {
                "" => None,
                name => Some(CharlsonCategory::from_name(name).ok_or_else(|| bad(format!("unknown category {name:?}")))?),
            };
            entries.push(CharlsonEntry {
                version,
                prefix,
                category,
                weight,
                supersedes,
            });
        }
        Self::build(entries, file)
    }

    /// Switches the severity hierarchy (e.g. severe liver disease silencing
    /// mild liver disease) on or off. On by default.
    pub fn with_hierarchy(mut self, on: bool) -> Self {
        self.hierarchy = on;
        self
    }

    pub fn hierarchy(&self) -> bool {
        self.hierarchy
    }

    pub fn weight(&self, category: CharlsonCategory) -> u32 {
        self.weights[category as usize]
    }

    /// Sum of all category weights: the largest attainable index.
    pub fn max_score(&self) -> u32 {
        self.weights.iter().sum()
    }

    /// Bitmask of every category whose prefixes match `code`.
    pub fn categories_of(&self, code: &IcdCode) -> u32 {
        let longest = code.code.len().min(self.max_prefix_len);
        (1..=longest)
            .filter_map(|len| self.by_prefix.get(&(code.version, code.code[..len].to_string())))
            .fold(0, |acc, bits| acc | bits)
    }

    pub fn categories_present<'a>(&self, codes: impl IntoIterator<Item = &'a IcdCode>) -> Vec<CharlsonCategory> {
        let mask = self.resolve(codes.into_iter().fold(0, |acc, c| acc | self.categories_of(c)));
        CharlsonCategory::ALL.iter().copied().filter(|c| mask & c.bit() != 0).collect()
    }

    fn resolve(&self, mut present: u32) -> u32 {
        if self.hierarchy {
            let silenced = CharlsonCategory::ALL
                .iter()
                .filter(|c| present & c.bit() != 0)
                .fold(0, |acc, c| acc | self.silences[*c as usize]);
            present &= !silenced;
        }
        present
    }

    pub fn score<'a>(&self, codes: impl IntoIterator<Item = &'a IcdCode>) -> u32 {
        let mask = self.resolve(codes.into_iter().fold(0, |acc, c| acc | self.categories_of(c)));
        CharlsonCategory::ALL
            .iter()
            .filter(|c| mask & c.bit() != 0)
            .map(|c| self.weights[*c as usize])
            .sum()
    }
}

/// Charlson index of a diagnosis set: each present category counts its weight
/// once, after hierarchy suppression when enabled.
pub fn cci_for_diagnoses<'a>(map: &CharlsonMap, diagnoses: impl IntoIterator<Item = &'a IcdCode>) -> u32 {
    map.score(diagnoses)
}
