use std::collections::{BTreeMap, HashMap};

use super::{csv_rows, mapping_error};
use crate::ehr::{normalize_pattern, IcdCode, IcdVersion};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CcsEntry {
    pub version: IcdVersion,
    pub prefix: String,
    pub category_id: u32,
    pub category_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CcsCategory {
    pub id: u32,
    pub label: String,
}

/// Prefix table grouping diagnosis codes into CCS categories. When several
/// prefixes match a code, the longest one wins.
#[derive(Debug, Clone)]
pub struct CcsMap {
    by_prefix: HashMap<(IcdVersion, String), u32>,
    categories: BTreeMap<u32, String>,
    max_prefix_len: usize,
}

impl CcsMap {
    pub fn new(entries: Vec<CcsEntry>) -> Result<Self> {
        Self::build(entries, "<memory>")
    }

    fn build(entries: Vec<CcsEntry>, file: &str) -> Result<Self> {
        let mut by_prefix = HashMap::new();
        let mut categories: BTreeMap<u32, String> = BTreeMap::new();
        let mut max_prefix_len = 0;
        for e in entries {
            if e.category_id == 0 {
                return Err(mapping_error(file, format!("category_id must be >= 1 for prefix {}", e.prefix)));
            }
            let prefix = e.prefix.trim_end_matches(['x', 'X']).to_string();
            if prefix.is_empty() {
                return Err(mapping_error(file, "empty code prefix"));
            }
            match categories.get(&e.category_id) {
                Some(label) if *label != e.category_label => {
                    return Err(mapping_error(
                        file,
                        format!("category {} has labels {label:?} and {:?}", e.category_id, e.category_label),
                    ))
                }
                Some(_) => {}
                None => {
                    categories.insert(e.category_id, e.category_label.clone());
                }
            }
            max_prefix_len = max_prefix_len.max(prefix.len());
            if by_prefix.insert((e.version, prefix.clone()), e.category_id).is_some() {
                return Err(mapping_error(file, format!("duplicate entry for ICD-{} prefix {prefix}", e.version)));
            }
        }
        Ok(Self {
            by_prefix,
            categories,
            max_prefix_len,
        })
    }

    /// Parses the `icd_version,code_prefix,category_id,category_label` layout.
    pub fn from_csv_str(text: &str, file: &str) -> Result<Self> {
        let rows = csv_rows(text, file, &["icd_version", "code_prefix", "category_id", "category_label"], &[])?;
        let mut entries = Vec::with_capacity(rows.len());
        for (line, f) in rows {
            let bad = |what: &str| mapping_error(file, format!("line {line}: {what}"));
            let version = IcdVersion::parse(&f[0]).ok_or_else(|| bad("icd_version must be 9 or 10"))?;
            let prefix = normalize_pattern(&f[1]).map_err(|_| bad("malformed code_prefix"))?;
            let category_id = f[2].parse().map_err(|_| bad("category_id is not an integer"))?;
            entries.push(CcsEntry {
                version,
                prefix,
                category_id,
                category_label: f[3].clone(),
            });
        }
        Self::build(entries, file)
    }

    /// All categories in ascending id order.
    pub fn categories(&self) -> Vec<CcsCategory> {
        self.categories
            .iter()
            .map(|(&id, label)| CcsCategory { id, label: label.clone() })
            .collect()
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        self.categories.get(&id).map(String::as_str)
    }

    pub fn lookup(&self, version: IcdVersion, code: &str) -> Option<u32> {
        let longest = code.len().min(self.max_prefix_len);
        (1..=longest).rev().find_map(|len| {
            code.get(..len)
                .and_then(|prefix| self.by_prefix.get(&(version, prefix.to_string())))
                .copied()
        })
    }

    pub fn lookup_code(&self, code: &IcdCode) -> Option<u32> {
        self.lookup(code.version, &code.code)
    }
}

/// Category of the longest matching prefix entry, if any.
pub fn ccs_lookup(map: &CcsMap, version: IcdVersion, code: &str) -> Option<u32> {
    map.lookup(version, code)
}
