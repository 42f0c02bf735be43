use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// ICD revision carried explicitly on every diagnosis row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IcdVersion {
    #[serde(rename = "9")]
    Icd9,
    #[serde(rename = "10")]
    Icd10,
}

impl IcdVersion {
    pub fn parse(text: &str) -> Option<Self> {
        match text.trim() {
            "9" => Some(IcdVersion::Icd9),
            "10" => Some(IcdVersion::Icd10),
            _ => None,
        }
    }

    pub fn as_number(self) -> u8 {
        match self {
            IcdVersion::Icd9 => 9,
            IcdVersion::Icd10 => 10,
        }
    }
}

impl fmt::Display for IcdVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_number())
    }
}

/// A normalized diagnosis code: uppercase, no dots, no surrounding whitespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IcdCode {
    pub version: IcdVersion,
    pub code: String,
}

impl IcdCode {
    pub fn new(raw: &str, version: IcdVersion) -> Result<Self> {
        normalize_icd(raw, version)
    }
}

impl fmt::Display for IcdCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ICD{}:{}", self.version, self.code)
    }
}

/// Normalizes a raw code as found in an extract ("  k70.30 " -> "K7030").
///
/// Idempotent. Fails when nothing is left after trimming, or when the code
/// contains characters other than ASCII letters, digits and dots.
pub fn normalize_icd(raw: &str, version: IcdVersion) -> Result<IcdCode> {
    let code: String = raw
        .trim()
        .chars()
        .filter(|&c| c != '.')
        .map(|c| c.to_ascii_uppercase())
        .collect();
    if code.is_empty() || !code.chars().all(|c| c.is_ascii_alphanumeric()) {
        return Err(Error::MalformedCode(raw.to_string()));
    }
    Ok(IcdCode { version, code })
}

/// Normalizes a code pattern. A trailing `x`/`X` is kept as a wildcard marker.
pub fn normalize_pattern(raw: &str) -> Result<String> {
    let trimmed = raw.trim();
    let (body, wildcard) = match trimmed.strip_suffix(['x', 'X']) {
        Some(body) => (body, true),
        None => (trimmed, false),
    };
    let body: String = body
        .chars()
        .filter(|&c| c != '.')
        .map(|c| c.to_ascii_uppercase())
        .collect();
    if body.is_empty() || !body.chars().all(|c| c.is_ascii_alphanumeric()) {
        return Err(Error::MalformedCode(raw.to_string()));
    }
    Ok(if wildcard { format!("{body}x") } else { body })
}

/// `true` iff `code` equals `pattern`, or starts with the part of `pattern`
/// before a trailing `x` wildcard.
pub fn code_matches_pattern(code: &str, pattern: &str) -> bool {
    match pattern.strip_suffix(['x', 'X']) {
        Some(prefix) => code.starts_with(prefix),
        None => code == pattern,
    }
}

/// A versioned code pattern such as ICD-10 `K74.6x`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodePattern {
    pub version: IcdVersion,
    pub pattern: String,
}

impl CodePattern {
    pub fn new(version: IcdVersion, raw: &str) -> Result<Self> {
        Ok(Self {
            version,
            pattern: normalize_pattern(raw)?,
        })
    }

    pub fn matches(&self, code: &IcdCode) -> bool {
        self.version == code.version && code_matches_pattern(&code.code, &self.pattern)
    }
}
