//! C ABI for the cirrhosis-horizon library.
//!
//! Conventions:
//! * Every fallible function returns a [`ChStatus`]; results are written
//!   through out-pointers only on success.
//! * On failure, a message is available from [`ch_last_error_message`] on
//!   the same thread until the next failing call.
//! * Handles are opaque. Each `*_load` has a matching `*_free`, which
//!   accepts null.
//! * Strings are NUL-terminated UTF-8. Missing feature values are NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use cirrhosis_horizon::baseline::{fib4, fib5, SerumPanel};
use cirrhosis_horizon::ehr::{load_record_set, ClinicalRecordSet, LoadOptions, RecordPaths};
use cirrhosis_horizon::gbdt::GbdtModel;
use cirrhosis_horizon::pipeline::{self, EvalMode, RunConfig};
use cirrhosis_horizon::stats::roc_auc;
use cirrhosis_horizon::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    MissingDependency = 4,
    Io = 5,
    Data = 6,
    Domain = 7,
    Panic = 8,
}

/// A loaded model.
pub struct ChModel {
    model: GbdtModel,
    names: Vec<CString>,
}

/// A loaded record set.
pub struct ChRecords {
    records: ClinicalRecordSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> ChStatus {
    match e {
        Error::Config(_) => ChStatus::Config,
        Error::MissingDependency(_) => ChStatus::MissingDependency,
        Error::Io { .. } => ChStatus::Io,
        Error::Domain(_) => ChStatus::Domain,
        _ => ChStatus::Data,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guarded(f: impl FnOnce() -> Result<(), (ChStatus, String)>) -> ChStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ChStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ChStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (ChStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (ChStatus, String) {
    (ChStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (ChStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (ChStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ch_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn ch_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ch_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

/// FIB-4 from age (years), AST and ALT (U/L) and platelets (10^9/L).
///
/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn ch_fib4(age_years: f64, ast: f64, alt: f64, platelets: f64, out: *mut f64) -> ChStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let panel = SerumPanel {
            age_years,
            ast_u_per_l: ast,
            alt_u_per_l: alt,
            platelets_1e9_per_l: platelets,
            albumin_g_per_dl: f64::NAN,
            alp_u_per_l: f64::NAN,
        };
        *out = fib4(&panel).map_err(lib_err)?;
        Ok(())
    })
}

/// FIB-5 from AST, ALT and ALP (U/L), albumin (g/dL) and platelets.
///
/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn ch_fib5(
    ast: f64,
    alt: f64,
    platelets: f64,
    albumin_g_per_dl: f64,
    alp: f64,
    out: *mut f64,
) -> ChStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let panel = SerumPanel {
            age_years: f64::NAN,
            ast_u_per_l: ast,
            alt_u_per_l: alt,
            platelets_1e9_per_l: platelets,
            albumin_g_per_dl,
            alp_u_per_l: alp,
        };
        *out = fib5(&panel).map_err(lib_err)?;
        Ok(())
    })
}

/// Area under the ROC curve. Labels are 0 or 1; ties get half credit.
///
/// # Safety
/// `scores` and `labels` must point to `n` readable elements; `out` to one
/// writable `double`.
#[no_mangle]
pub unsafe extern "C" fn ch_roc_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> ChStatus {
    guarded(|| {
        if scores.is_null() || labels.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let scores = std::slice::from_raw_parts(scores, n);
        let labels: Vec<bool> = std::slice::from_raw_parts(labels, n)
            .iter()
            .map(|&l| match l {
                0 => Ok(false),
                1 => Ok(true),
                other => Err((ChStatus::InvalidArgument, format!("label {other} is not 0 or 1"))),
            })
            .collect::<Result<_, _>>()?;
        *out = roc_auc(scores, &labels).map_err(lib_err)?.auc;
        Ok(())
    })
}

fn model_handle(model: GbdtModel) -> Result<*mut ChModel, (ChStatus, String)> {
    let names = model
        .feature_names
        .iter()
        .map(|n| CString::new(n.as_str()).map_err(|_| (ChStatus::Data, "feature name contains NUL".to_string())))
        .collect::<Result<_, _>>()?;
    Ok(Box::into_raw(Box::new(ChModel { model, names })))
}

/// Loads a `model.json` file.
///
/// # Safety
/// `path` must be a valid string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ch_model_load(path: *const c_char, out: *mut *mut ChModel) -> ChStatus {
    guarded(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let model = pipeline::read_model(&PathBuf::from(path)).map_err(lib_err)?;
        *out = model_handle(model)?;
        Ok(())
    })
}

/// Parses a model from JSON text.
///
/// # Safety
/// `json` must be a valid string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ch_model_from_json(json: *const c_char, out: *mut *mut ChModel) -> ChStatus {
    guarded(|| {
        let text = str_arg(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let model = GbdtModel::from_json(text).map_err(lib_err)?;
        *out = model_handle(model)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ch_model_free(model: *mut ChModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of input features the model expects.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ch_model_n_features(model: *const ChModel, out: *mut usize) -> ChStatus {
    guarded(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.model.feature_names.len();
        Ok(())
    })
}

/// Name of feature `index`, owned by the handle, or null when out of range.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ch_model_feature_name(model: *const ChModel, index: usize) -> *const c_char {
    match model.as_ref().and_then(|m| m.names.get(index)) {
        Some(n) => n.as_ptr(),
        None => ptr::null(),
    }
}

/// Predicted probability for one row laid out in feature order.
///
/// # Safety
/// `row` must point to `n` readable doubles; `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn ch_model_predict_proba(
    model: *const ChModel,
    row: *const f64,
    n: usize,
    out: *mut f64,
) -> ChStatus {
    guarded(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if row.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let expected = m.model.feature_names.len();
        if n != expected {
            return Err((ChStatus::InvalidArgument, format!("row has {n} values, model expects {expected}")));
        }
        *out = m.model.predict_proba_row(std::slice::from_raw_parts(row, n));
        Ok(())
    })
}

/// Loads the five record CSVs from a directory.
///
/// # Safety
/// `dir` must be a valid string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ch_records_load(dir: *const c_char, out: *mut *mut ChRecords) -> ChStatus {
    guarded(|| {
        let dir = str_arg(dir, "dir")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (records, _) = load_record_set(&RecordPaths::in_dir(dir), LoadOptions::default()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(ChRecords { records }));
        Ok(())
    })
}

/// # Safety
/// `records` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ch_records_n_patients(records: *const ChRecords, out: *mut usize) -> ChStatus {
    guarded(|| {
        let r = records.as_ref().ok_or_else(|| null("records"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = r.records.patients().len();
        Ok(())
    })
}

/// # Safety
/// `records` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ch_records_free(records: *mut ChRecords) {
    if !records.is_null() {
        drop(Box::from_raw(records));
    }
}

/// Runs one pipeline stage: `generate`, `cohort`, `features`, `train`,
/// `eval` or `eval-benchmark`. A null `config_path` uses the defaults;
/// `output_dir` and `data_dir`, when not null, override the configured
/// directories.
///
/// # Safety
/// String arguments must be null or valid strings.
#[no_mangle]
pub unsafe extern "C" fn ch_run_stage(
    config_path: *const c_char,
    data_dir: *const c_char,
    output_dir: *const c_char,
    stage: *const c_char,
) -> ChStatus {
    guarded(|| {
        let stage = str_arg(stage, "stage")?;
        let mut cfg = if config_path.is_null() {
            RunConfig::default()
        } else {
            RunConfig::from_json_file(&PathBuf::from(str_arg(config_path, "config_path")?)).map_err(lib_err)?
        };
        if !data_dir.is_null() {
            cfg.data_dir = PathBuf::from(str_arg(data_dir, "data_dir")?);
        }
        if !output_dir.is_null() {
            cfg.output_dir = PathBuf::from(str_arg(output_dir, "output_dir")?);
        }
        let cfg = cfg.with_env_seed().and_then(RunConfig::resolve).map_err(lib_err)?;
        let done = match stage {
            "generate" => pipeline::run_generate(&cfg).map(drop),
            "cohort" => pipeline::run_cohort(&cfg).map(drop),
            "features" => pipeline::run_features(&cfg).map(drop),
            "train" => pipeline::run_train(&cfg, None).map(drop),
            "eval" => pipeline::run_eval(&cfg, EvalMode::Full).map(drop),
            "eval-benchmark" => pipeline::run_eval(&cfg, EvalMode::BenchmarkOnly).map(drop),
            other => return Err((ChStatus::InvalidArgument, format!("unknown stage {other:?}"))),
        };
        done.map_err(lib_err)
    })
}
