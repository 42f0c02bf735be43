//! Published cohort characteristics used as default calibration targets.

use std::collections::BTreeMap;

use super::dist::{ContinuousSpec, Distribution};
use super::{GeneratorConfig, GroupSpec, PlantedSignalSpec};
use crate::ehr::{ALBUMIN, ALP, ALT, AST, BILIRUBIN, HEMOGLOBIN, PLATELETS, PROTEIN, PT};

/// (variable key, [overall, controls, cases] as (mean, sd)).
type ContinuousRow = (&'static str, [(f64, f64); 3]);
/// (level, [overall, controls, cases] counts).
type CountRow = (&'static str, [u32; 3]);

struct Table {
    counts: [usize; 3],
    gender: &'static [CountRow],
    race: &'static [CountRow],
    marital: &'static [CountRow],
    /// RUCC codes 1 through 9.
    rucc: [[u32; 3]; 9],
    continuous: &'static [ContinuousRow],
    planted: &'static [&'static str],
}

const ONE_YEAR: Table = Table {
    counts: [3043, 2139, 904],
    gender: &[("Female", [1767, 1295, 472]), ("Male", [1275, 843, 432]), ("Unknown", [1, 1, 0])],
    race: &[
        ("Native American", [5, 4, 1]),
        ("Asian", [83, 63, 20]),
        ("Black", [973, 748, 225]),
        ("Decline", [11, 10, 1]),
        ("Hispanic", [29, 23, 6]),
        ("Multiple", [1, 1, 0]),
        ("White", [1941, 1290, 651]),
    ],
    marital: &[
        ("Divorced", [362, 261, 101]),
        ("Life Partner", [14, 12, 2]),
        ("Married", [1457, 1024, 433]),
        ("Separated", [41, 30, 11]),
        ("Single", [852, 585, 267]),
        ("Unknown", [54, 38, 16]),
        ("Widowed", [263, 189, 74]),
    ],
    rucc: [
        [2235, 1683, 552],
        [221, 115, 106],
        [198, 107, 91],
        [176, 110, 66],
        [18, 9, 9],
        [61, 36, 25],
        [12, 7, 5],
        [75, 46, 29],
        [47, 26, 21],
    ],
    continuous: &[
        ("age", [(55.8, 13.3), (55.5, 13.9), (56.8, 11.9)]),
        ("cci", [(0.3, 0.4), (0.3, 0.4), (0.4, 0.4)]),
        ("BMI", [(33.1, 8.3), (33.5, 8.5), (32.3, 7.7)]),
        ("DBP", [(79.2, 7.2), (79.3, 7.1), (79.0, 7.4)]),
        ("SBP", [(131.8, 12.7), (131.6, 12.5), (132.3, 13.3)]),
        (ALT.loinc, [(36.4, 36.6), (33.1, 36.6), (44.2, 35.6)]),
        (ALBUMIN.loinc, [(4.1, 4.6), (4.2, 5.5), (3.8, 0.5)]),
        (AST.loinc, [(36.4, 32.7), (31.3, 29.3), (48.4, 36.8)]),
        (BILIRUBIN.loinc, [(0.7, 0.7), (0.6, 0.5), (1.0, 0.8)]),
        (PLATELETS.loinc, [(227.9, 89.3), (243.2, 81.4), (191.7, 96.5)]),
        (PROTEIN.loinc, [(7.0, 0.6), (7.0, 0.5), (7.1, 0.6)]),
        (PT.loinc, [(14.3, 2.7), (14.2, 2.6), (14.8, 3.0)]),
        (ALP.loinc, [(92.4, 66.5), (85.0, 42.9), (109.9, 100.5)]),
        (HEMOGLOBIN.loinc, [(12.9, 1.7), (12.9, 1.7), (13.0, 1.8)]),
    ],
    planted: &[
        "gender",
        "race",
        "rucc",
        "age",
        "cci",
        "BMI",
        ALT.loinc,
        ALBUMIN.loinc,
        AST.loinc,
        BILIRUBIN.loinc,
        PLATELETS.loinc,
        PROTEIN.loinc,
        PT.loinc,
        ALP.loinc,
    ],
};

const TWO_YEAR: Table = Table {
    counts: [1981, 1473, 508],
    gender: &[("Female", [1132, 885, 247]), ("Male", [848, 587, 261]), ("Unknown", [1, 1, 0])],
    race: &[
        ("Native American", [4, 3, 1]),
        ("Asian", [58, 49, 9]),
        ("Black", [683, 524, 159]),
        ("Decline", [7, 7, 0]),
        ("Hispanic", [22, 18, 4]),
        ("White", [1207, 872, 335]),
    ],
    marital: &[
        ("Divorced", [229, 167, 62]),
        ("Life Partner", [10, 8, 2]),
        ("Married", [945, 715, 230]),
        ("Separated", [26, 22, 4]),
        ("Single", [563, 399, 164]),
        ("Unknown", [35, 27, 8]),
        ("Widowed", [173, 135, 38]),
    ],
    rucc: [
        [1542, 1186, 356],
        [114, 73, 41],
        [104, 64, 40],
        [112, 76, 36],
        [10, 6, 4],
        [37, 25, 12],
        [6, 2, 4],
        [31, 23, 8],
        [25, 18, 7],
    ],
    continuous: &[
        ("age", [(55.3, 13.5), (55.2, 13.8), (55.3, 12.7)]),
        ("cci", [(0.3, 0.4), (0.3, 0.4), (0.3, 0.3)]),
        ("BMI", [(33.2, 8.1), (33.6, 8.1), (32.2, 7.9)]),
        ("DBP", [(79.4, 6.9), (79.2, 6.8), (80.0, 6.9)]),
        ("SBP", [(132.0, 12.3), (131.7, 12.3), (132.9, 12.3)]),
        (ALT.loinc, [(36.0, 41.3), (32.6, 38.8), (46.1, 46.3)]),
        (ALBUMIN.loinc, [(4.3, 7.8), (4.5, 9.0), (3.9, 0.4)]),
        (AST.loinc, [(35.1, 34.5), (30.4, 29.3), (48.7, 43.8)]),
        (BILIRUBIN.loinc, [(0.7, 0.6), (0.6, 0.5), (0.9, 0.8)]),
        (PLATELETS.loinc, [(234.1, 79.6), (241.8, 75.7), (211.8, 86.2)]),
        (PROTEIN.loinc, [(7.1, 0.6), (7.0, 0.5), (7.1, 0.6)]),
        (PT.loinc, [(14.2, 2.6), (14.1, 2.5), (14.5, 2.9)]),
        (ALP.loinc, [(89.3, 57.8), (83.7, 40.0), (105.7, 89.6)]),
        (HEMOGLOBIN.loinc, [(13.0, 1.7), (13.0, 1.7), (13.0, 1.8)]),
    ],
    planted: &[
        "gender",
        "rucc",
        "BMI",
        "DBP",
        ALT.loinc,
        ALBUMIN.loinc,
        AST.loinc,
        BILIRUBIN.loinc,
        PLATELETS.loinc,
        PROTEIN.loinc,
        PT.loinc,
        ALP.loinc,
    ],
};

const THREE_YEAR: Table = Table {
    counts: [1470, 1099, 371],
    gender: &[("Female", [849, 665, 184]), ("Male", [621, 434, 187])],
    race: &[
        ("Native American", [3, 2, 1]),
        ("Asian", [43, 36, 7]),
        ("Black", [486, 381, 105]),
        ("Decline", [6, 6, 0]),
        ("Hispanic", [14, 13, 1]),
        ("White", [918, 661, 257]),
    ],
    marital: &[
        ("Divorced", [159, 122, 37]),
        ("Life Partner", [8, 7, 1]),
        ("Married", [715, 537, 178]),
        ("Separated", [19, 16, 3]),
        ("Single", [421, 305, 116]),
        ("Unknown", [23, 16, 7]),
        ("Widowed", [125, 96, 29]),
    ],
    rucc: [
        [1152, 892, 260],
        [84, 54, 30],
        [68, 42, 26],
        [85, 56, 29],
        [5, 4, 1],
        [29, 20, 9],
        [6, 2, 4],
        [22, 16, 6],
        [19, 13, 6],
    ],
    continuous: &[
        ("age", [(54.6, 13.4), (54.6, 13.7), (54.7, 12.6)]),
        ("cci", [(0.3, 0.4), (0.3, 0.4), (0.3, 0.3)]),
        ("BMI", [(33.2, 8.0), (33.3, 7.9), (32.8, 8.2)]),
        ("DBP", [(79.3, 7.0), (79.0, 7.1), (80.1, 6.9)]),
        ("SBP", [(131.6, 12.4), (131.2, 12.2), (132.8, 12.9)]),
        (ALT.loinc, [(35.1, 33.9), (31.9, 30.8), (44.5, 40.2)]),
        (ALBUMIN.loinc, [(4.4, 8.6), (4.5, 9.9), (3.9, 0.4)]),
        (AST.loinc, [(33.5, 29.0), (29.6, 23.8), (44.9, 38.6)]),
        (BILIRUBIN.loinc, [(0.7, 0.6), (0.6, 0.5), (0.8, 0.6)]),
        (PLATELETS.loinc, [(235.7, 79.0), (242.6, 77.4), (215.2, 80.3)]),
        (PROTEIN.loinc, [(7.0, 0.6), (7.0, 0.6), (7.1, 0.6)]),
        (PT.loinc, [(14.2, 2.7), (14.1, 2.5), (14.6, 3.1)]),
        (ALP.loinc, [(87.7, 55.8), (83.1, 41.3), (101.5, 83.9)]),
        (HEMOGLOBIN.loinc, [(13.1, 1.8), (13.0, 1.8), (13.2, 1.8)]),
    ],
    planted: &[
        "gender",
        "race",
        "rucc",
        "DBP",
        "SBP",
        ALT.loinc,
        AST.loinc,
        BILIRUBIN.loinc,
        PLATELETS.loinc,
        PROTEIN.loinc,
        PT.loinc,
        ALP.loinc,
    ],
};

/// Diagnosis-group prevalence (controls, cases) at the one-year horizon,
/// keyed by demo CCS category id. The published tables carry no
/// prevalences, so these are illustrative values with the direction of
/// association described for the study cohort.
const CCS_PREVALENCE: [(u32, f64, f64); 15] = [
    (1, 0.30, 0.40),
    (2, 0.45, 0.38),
    (3, 0.10, 0.25),
    (4, 0.15, 0.22),
    (5, 0.35, 0.45),
    (6, 0.20, 0.27),
    (7, 0.25, 0.33),
    (8, 0.10, 0.15),
    (9, 0.30, 0.37),
    (10, 0.50, 0.52),
    (11, 0.25, 0.26),
    (12, 0.20, 0.21),
    (13, 0.05, 0.08),
    (14, 0.15, 0.17),
    (15, 0.10, 0.14),
];

/// Albumin draws are confined to this range (g/dL).
pub const ALBUMIN_BOUNDS: (f64, f64) = (1.0, 6.0);

/// Variables drawn from a lognormal because their spread is comparable to
/// their mean.
const LOGNORMAL: [&str; 6] = ["cci", ALT.loinc, AST.loinc, ALP.loinc, BILIRUBIN.loinc, PT.loinc];

fn continuous_spec(key: &str, mean: f64, sd: f64) -> ContinuousSpec {
    if key == ALBUMIN.loinc {
        ContinuousSpec::capped(mean, sd, ALBUMIN_BOUNDS.0, ALBUMIN_BOUNDS.1)
    } else if LOGNORMAL.contains(&key) {
        ContinuousSpec {
            distribution: Distribution::Lognormal,
            ..ContinuousSpec::truncated_normal(mean, sd)
        }
    } else {
        ContinuousSpec::truncated_normal(mean, sd)
    }
}

fn proportions(rows: &[CountRow], col: usize, total: usize) -> BTreeMap<String, f64> {
    rows.iter()
        .map(|(level, c)| (level.to_string(), f64::from(c[col]) / total as f64))
        .collect()
}

/// Generator configuration calibrated to the published characteristics
/// for a 1-, 2- or 3-year horizon.
///
/// # Panics
/// Panics if `window_years` is not 1, 2 or 3.
pub fn default_config(window_years: u32) -> GeneratorConfig {
    let table = match window_years {
        1 => &ONE_YEAR,
        2 => &TWO_YEAR,
        3 => &THREE_YEAR,
        other => panic!("default_config supports windows 1-3, got {other}"),
    };
    // diagnosis-group differences fade with a longer horizon
    let fade = match window_years {
        1 => 1.0,
        2 => 0.8,
        _ => 0.7,
    };
    let [n_all, n_ctl, n_case] = table.counts;
    let group = |col: usize| {
        let total = table.counts[col];
        let continuous = table
            .continuous
            .iter()
            .map(|(key, stats)| {
                let (m, s) = stats[col];
                (key.to_string(), continuous_spec(key, m, s))
            })
            .collect();
        let mut categorical = BTreeMap::new();
        categorical.insert("gender".to_string(), proportions(table.gender, col, total));
        categorical.insert("race".to_string(), proportions(table.race, col, total));
        categorical.insert("marital_status".to_string(), proportions(table.marital, col, total));
        categorical.insert(
            "rucc".to_string(),
            table
                .rucc
                .iter()
                .enumerate()
                .map(|(i, c)| ((i + 1).to_string(), f64::from(c[col]) / total as f64))
                .collect(),
        );
        let ccs_prevalence = CCS_PREVALENCE
            .iter()
            .map(|&(id, ctl, case)| {
                let case = ctl + (case - ctl) * fade;
                let p = match col {
                    0 => (ctl * n_ctl as f64 + case * n_case as f64) / n_all as f64,
                    1 => ctl,
                    _ => case,
                };
                (id, p)
            })
            .collect();
        GroupSpec {
            continuous,
            categorical,
            ccs_prevalence,
        }
    };
    let mut planted: Vec<String> = table.planted.iter().map(|s| s.to_string()).collect();
    planted.extend(CCS_PREVALENCE.iter().map(|(id, _, _)| format!("ccs:{id}")));
    GeneratorConfig {
        window_years,
        n_cases: n_case,
        n_controls: n_ctl,
        overall: group(0),
        controls: group(1),
        cases: group(2),
        planted: PlantedSignalSpec { variables: planted },
        ..GeneratorConfig::base(window_years)
    }
}
