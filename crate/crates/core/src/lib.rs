//! Incident liver-cirrhosis risk modelling on structured EHR extracts.
//!
//! The crate covers the whole study pipeline: ingesting five CSV tables into a
//! [`ehr::ClinicalRecordSet`], building temporally anchored case/control
//! cohorts, aggregating observation windows into a [`features::FeatureMatrix`],
//! scoring the FIB-4/FIB-5 serum baselines, training second-order
//! gradient-boosted trees and comparing both with ROC/AUC.
//!
//! A calibrated synthetic generator ([`synth`]) makes every stage runnable
//! without access to protected health data.

pub mod baseline;
pub mod cohort;
pub mod ehr;
pub mod error;
pub mod features;
pub mod gbdt;
pub mod pipeline;
pub mod stats;
pub mod synth;
pub mod terminology;
pub(crate) mod util;

pub use error::{Error, Result};

/// Version string embedded in every emitted artifact.
pub const TOOL_VERSION: &str = concat!("cirrhosis-horizon ", env!("CARGO_PKG_VERSION"));
