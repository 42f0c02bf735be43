//! Splitting, ROC/AUC, hypothesis tests and cohort characteristic tables.

mod hypothesis;
mod roc;
pub mod special;
mod split;
mod table;

pub use hypothesis::{chi_square_p, mean_var, welch_t_p, ChiSquare, WelchT};
pub use roc::{roc_auc, sens_spec_at, trapezoid_area, RocResult};
pub use split::{random_split, stratified_split, test_count};

pub use table::{characteristics_table, CharacteristicsRow, CharacteristicsTable, GroupSummary, LevelCounts, TestOutcome};
