//! Stage orchestration: generate, cohort, features, train, eval, replicate
//! and standalone scoring.
//!
//! Every stage reads its inputs from flat files, writes its outputs into the
//! configured directories and stamps each artifact with the tool version,
//! a SHA-256 hash of the resolved configuration and the seed. No stage
//! records wall-clock time, so rerunning a stage on unchanged inputs
//! reproduces its outputs byte for byte.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::baseline::{
    classify_cutoff, fib4_for_cohort, fib5_for_cohort, panel_from_records, read_score_input, CutoffDirection,
    LabAggregation, RiskClass, SerumIndex,
};
use crate::baseline::{FIB4_REPORTED_SENS_SPEC, FIB5_REPORTED_SENS_SPEC};
use crate::cohort::{build_cohort, read_cohort_csv, write_cohort_csv, CohortAssignment, CohortReport, CohortSpec};
use crate::ehr::{load_record_set, write_record_set, LoadOptions, RecordPaths};
use crate::features::{assemble_matrix, AssemblyReport, FeatureMatrix, FeatureSchema};
use crate::gbdt::{predict, train_with, EarlyStopping, GbdtModel, GbdtParams, TrainOptions};
use crate::stats::{characteristics_table, random_split, roc_auc, stratified_split, RocResult};
use crate::synth::{default_config, generate, write_truth_csv, GeneratorConfig};
use crate::terminology::{Terminology, TerminologyPaths};
use crate::{Error, Result, TOOL_VERSION};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "CH_SEED";

/// Test-set AUCs reported for the original clinical cohort, as
/// `(window_years, gbdt, fib4)`. Shown beside synthetic results for
/// orientation only.
pub const REFERENCE_AUCS: [(u32, f64, f64); 3] = [(1, 0.81, 0.71), (2, 0.73, 0.63), (3, 0.69, 0.57)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    /// Stratify the split by label.
    pub stratify: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.3,
            stratify: true,
        }
    }
}

/// Everything a run depends on. The single `seed` drives every random
/// component; the `rng_seed` fields of the nested sections are overwritten
/// from it when the configuration is resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding the five record CSVs (written by `generate`).
    pub data_dir: PathBuf,
    /// Directory receiving stage outputs.
    pub output_dir: PathBuf,
    pub terminology: TerminologyPaths,
    pub window_years: u32,
    pub seed: u64,
    pub cohort: CohortSpec,
    pub gbdt: GbdtParams,
    pub split: SplitConfig,
    pub early_stopping: Option<EarlyStopping>,
    /// Generator settings; the calibrated defaults for `window_years` when
    /// absent.
    pub generator: Option<GeneratorConfig>,
    /// Skip malformed input rows instead of failing.
    pub lenient: bool,
    /// Lab reduction feeding the FIB-4/FIB-5 benchmark: the window mean
    /// (the model's own features) or the last value on or before the
    /// prediction point.
    pub benchmark_labs: LabAggregation,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            terminology: TerminologyPaths::default(),
            window_years: 1,
            seed: 7,
            cohort: CohortSpec::default(),
            gbdt: GbdtParams::default(),
            split: SplitConfig::default(),
            early_stopping: None,
            generator: None,
            lenient: false,
            benchmark_labs: LabAggregation::Mean,
        }
    }
}

impl RunConfig {
    /// Reads a JSON config. Syntax errors are reported with line and column.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Config(format!("config file {} not found", path.display())),
            _ => Error::io(path, e),
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Applies the seed override from the environment, if set.
    pub fn with_env_seed(mut self) -> Result<Self> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            self.seed = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={raw:?} is not an unsigned integer")))?;
        }
        Ok(self)
    }

    /// Propagates `window_years` and `seed` into the nested sections and
    /// validates the result.
    pub fn resolve(mut self) -> Result<Self> {
        self.cohort.window_years = self.window_years;
        self.cohort.rng_seed = self.seed;
        self.gbdt.rng_seed = self.seed;
        if let Some(g) = &mut self.generator {
            if g.window_years != self.window_years {
                return Err(Error::Config(format!(
                    "generator.window_years is {} but window_years is {}",
                    g.window_years, self.window_years
                )));
            }
            g.rng_seed = self.seed;
        }
        self.cohort.validate()?;
        self.gbdt.validate()?;
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return Err(Error::Config("split.test_fraction must be in (0, 1)".into()));
        }
        if let Some(g) = &self.generator {
            g.validate()?;
        }
        Ok(self)
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        self.generator.clone().unwrap_or_else(|| GeneratorConfig {
            rng_seed: self.seed,
            ..default_config(self.window_years)
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            tool: TOOL_VERSION.to_string(),
            config_hash: self.hash(),
            seed: self.seed,
        }
    }

    pub fn paths(&self) -> StagePaths {
        StagePaths::new(&self.data_dir, &self.output_dir)
    }
}

/// The reproducibility triplet stamped on every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    /// Single-line form used as the leading `#` comment of CSV outputs.
    pub fn comment(&self) -> String {
        format!(
            "tool={} config_hash={} seed={}",
            self.tool.replace(' ', "/"),
            self.config_hash,
            self.seed
        )
    }
}

/// File locations shared by the stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagePaths {
    pub records: RecordPaths,
    pub truth: PathBuf,
    pub manifest: PathBuf,
    pub cohort: PathBuf,
    pub cohort_report: PathBuf,
    pub features: PathBuf,
    pub schema: PathBuf,
    pub assembly: PathBuf,
    pub model: PathBuf,
    pub training: PathBuf,
    pub roc: PathBuf,
    pub roc_plot: PathBuf,
    pub metrics: PathBuf,
    pub characteristics: PathBuf,
}

impl StagePaths {
    pub fn new(data_dir: &Path, out: &Path) -> Self {
        Self {
            records: RecordPaths::in_dir(data_dir),
            truth: data_dir.join("truth.csv"),
            manifest: data_dir.join("manifest.json"),
            cohort: out.join("cohort.csv"),
            cohort_report: out.join("report.json"),
            features: out.join("features.csv"),
            schema: out.join("schema.json"),
            assembly: out.join("assembly.json"),
            model: out.join("model.json"),
            training: out.join("training.json"),
            roc: out.join("roc.csv"),
            roc_plot: out.join("roc.vg.json"),
            metrics: out.join("metrics.json"),
            characteristics: out.join("table_characteristics.csv"),
        }
    }
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingDependency(path.to_path_buf()))
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes `body` as pretty JSON with a `provenance` member appended.
fn write_json(path: &Path, body: Value, prov: &Provenance) -> Result<()> {
    let mut body = body;
    if let Value::Object(map) = &mut body {
        map.insert("provenance".into(), serde_json::to_value(prov)?);
    }
    write_text(path, &(serde_json::to_string_pretty(&body)? + "\n"))
}

fn load_records(cfg: &RunConfig) -> Result<crate::ehr::ClinicalRecordSet> {
    let paths = cfg.paths();
    for p in [
        &paths.records.patients,
        &paths.records.encounters,
        &paths.records.diagnoses,
        &paths.records.labs,
        &paths.records.vitals,
    ] {
        require(p)?;
    }
    let (records, report) = load_record_set(&paths.records, LoadOptions { lenient: cfg.lenient })?;
    for r in &report.rejected {
        eprintln!("skipped {}:{}: {}", r.file, r.line, r.reason);
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenerateSummary {
    pub patients: usize,
    pub cases: usize,
    pub controls: usize,
    pub encounters: usize,
    pub diagnoses: usize,
    pub labs: usize,
    pub vitals: usize,
}

/// Writes a synthetic record set, its truth file and a manifest.
pub fn run_generate(cfg: &RunConfig) -> Result<GenerateSummary> {
    let prov = cfg.provenance();
    let gen = cfg.generator_config();
    let data = generate(&gen)?;
    let paths = cfg.paths();
    ensure_dir(&cfg.data_dir)?;
    write_record_set(&data.records, &cfg.data_dir, Some(&prov.comment()))?;
    write_truth_csv(&paths.truth, &data.truth, Some(&prov.comment()))?;
    let summary = GenerateSummary {
        patients: data.records.patients().len(),
        cases: gen.n_cases,
        controls: gen.n_controls,
        encounters: data.records.encounters().len(),
        diagnoses: data.records.diagnoses().len(),
        labs: data.records.labs().len(),
        vitals: data.records.vitals().len(),
    };
    write_json(
        &paths.manifest,
        json!({
            "window_years": gen.window_years,
            "counts": summary,
            "files": ["patients.csv", "encounters.csv", "diagnoses.csv", "labs.csv", "vitals.csv", "truth.csv"],
        }),
        &prov,
    )?;
    Ok(summary)
}

/// Builds the cohort and writes `cohort.csv` and `report.json`.
pub fn run_cohort(cfg: &RunConfig) -> Result<CohortReport> {
    let records = load_records(cfg)?;
    let (members, report) = build_cohort(&records, &cfg.cohort)?;
    let prov = cfg.provenance();
    let paths = cfg.paths();
    ensure_dir(&cfg.output_dir)?;
    write_cohort_csv(&paths.cohort, &members, Some(&prov.comment()))?;
    write_json(&paths.cohort_report, serde_json::to_value(&report)?, &prov)?;
    Ok(report)
}

/// Aggregates the observation windows into `features.csv` and
/// `schema.json`; the leakage guard's counters go to `assembly.json`.
pub fn run_features(cfg: &RunConfig) -> Result<AssemblyReport> {
    let paths = cfg.paths();
    require(&paths.cohort)?;
    let records = load_records(cfg)?;
    let cohort = read_cohort_csv(&paths.cohort)?;
    let terms = Terminology::load(&cfg.terminology)?;
    let (matrix, report) = assemble_matrix(&records, &cohort, &terms)?;
    if report.window_violations != 0 {
        return Err(Error::Consistency(format!(
            "{} events after a prediction point reached the features",
            report.window_violations
        )));
    }
    let prov = cfg.provenance();
    matrix.write_csv(&paths.features, Some(&prov.comment()))?;
    let schema: Value = serde_json::from_str(&matrix.schema().to_json())?;
    write_json(&paths.schema, schema, &prov)?;
    write_json(&paths.assembly, serde_json::to_value(&report)?, &prov)?;
    Ok(report)
}

fn load_features(cfg: &RunConfig) -> Result<FeatureMatrix> {
    let paths = cfg.paths();
    require(&paths.features)?;
    require(&paths.schema)?;
    let matrix = FeatureMatrix::read_csv(&paths.features)?;
    let text = fs::read_to_string(&paths.schema).map_err(|e| Error::io(&paths.schema, e))?;
    let schema = FeatureSchema::from_json(&text)?;
    if &schema != matrix.schema() {
        return Err(Error::Schema(format!(
            "{} does not match the columns of {}",
            paths.schema.display(),
            paths.features.display()
        )));
    }
    Ok(matrix)
}

/// Train/test row indices for a matrix under the configured split.
pub fn split_rows(cfg: &RunConfig, matrix: &FeatureMatrix) -> Result<(Vec<usize>, Vec<usize>)> {
    if cfg.split.stratify {
        let flags: Vec<bool> = matrix.labels().iter().map(|&l| l == 1).collect();
        stratified_split(&flags, cfg.split.test_fraction, cfg.seed)
    } else {
        random_split(matrix.n_rows(), cfg.split.test_fraction, cfg.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub n_train: usize,
    pub trees: usize,
    pub final_train_loss: f64,
}

/// Fits the model on the training partition and writes `model.json`.
/// `threads` sizes the worker pool and never changes the result.
pub fn run_train(cfg: &RunConfig, threads: Option<usize>) -> Result<TrainSummary> {
    let matrix = load_features(cfg)?;
    let (train_rows, _) = split_rows(cfg, &matrix)?;
    let train = matrix.subset(&train_rows);
    let options = TrainOptions {
        threads,
        early_stopping: cfg.early_stopping,
    };
    let outcome = train_with(&train, &cfg.gbdt, &options)?;
    let prov = cfg.provenance();
    let paths = cfg.paths();
    write_json(&paths.model, serde_json::to_value(&outcome.model)?, &prov)?;
    let summary = TrainSummary {
        n_train: train.n_rows(),
        trees: outcome.model.trees.len(),
        final_train_loss: outcome.history.last().map_or(f64::NAN, |h| h.train_loss),
    };
    write_json(
        &paths.training,
        json!({ "summary": summary, "history": outcome.history }),
        &prov,
    )?;
    Ok(summary)
}

/// Reads a `model.json` written by [`run_train`].
pub fn read_model(path: &Path) -> Result<GbdtModel> {
    require(path)?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    GbdtModel::from_json(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Model and both serum indices.
    Full,
    /// Serum indices only; no model is needed.
    BenchmarkOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub method: String,
    pub cutoff: f64,
    pub low_risk_side: CutoffDirection,
    pub sensitivity: f64,
    pub specificity: f64,
    /// Operating characteristics quoted for the cutoff in other populations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_sensitivity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_specificity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalMetrics {
    pub window_years: u32,
    pub n_test: usize,
    pub n_test_cases: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc_gbdt: Option<f64>,
    pub auc_fib4: f64,
    pub auc_fib5: f64,
    pub operating_points: Vec<OperatingPoint>,
}

fn operating_point(
    method: &str,
    scores: &[f64],
    labels: &[bool],
    cutoff: f64,
    direction: CutoffDirection,
    reference: Option<(f64, f64)>,
) -> OperatingPoint {
    let (mut tp, mut tn) = (0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        let elevated = classify_cutoff(s, cutoff, direction) == RiskClass::Elevated;
        match (elevated, l) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            _ => {}
        }
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    OperatingPoint {
        method: method.to_string(),
        cutoff,
        low_risk_side: direction,
        sensitivity: tp as f64 / pos as f64,
        specificity: tn as f64 / neg as f64,
        reference_sensitivity: reference.map(|r| r.0),
        reference_specificity: reference.map(|r| r.1),
    }
}

/// Scores the held-out partition and writes `roc.csv`, `roc.vg.json`,
/// `metrics.json` and `table_characteristics.csv`.
pub fn run_eval(cfg: &RunConfig, mode: EvalMode) -> Result<EvalMetrics> {
    let paths = cfg.paths();
    let matrix = load_features(cfg)?;
    require(&paths.cohort)?;
    let model = match mode {
        EvalMode::Full => Some(read_model(&paths.model)?),
        EvalMode::BenchmarkOnly => None,
    };
    let cohort = read_cohort_csv(&paths.cohort)?;
    let (_, test_rows) = split_rows(cfg, &matrix)?;
    let test = matrix.subset(&test_rows);
    let labels: Vec<bool> = test.labels().iter().map(|&l| l == 1).collect();

    let mut curves: Vec<(&str, RocResult)> = Vec::new();
    let mut points = Vec::new();
    let mut auc_gbdt = None;
    if let Some(model) = &model {
        let p = predict(model, &test)?;
        let roc = roc_auc(&p, &labels)?;
        auc_gbdt = Some(roc.auc);
        curves.push(("gbdt", roc));
        points.push(operating_point("gbdt", &p, &labels, 0.5, CutoffDirection::LtIsLowRisk, None));
    }
    let mut index_auc = |index: SerumIndex, scores: Vec<f64>, reference| -> Result<f64> {
        let oriented: Vec<f64> = scores.iter().map(|&s| index.risk_oriented(s)).collect();
        let roc = roc_auc(&oriented, &labels)?;
        let auc = roc.auc;
        curves.push((index.name(), roc));
        points.push(operating_point(
            index.name(),
            &scores,
            &labels,
            index.default_cutoff(),
            index.default_direction(),
            Some(reference),
        ));
        Ok(auc)
    };
    let (fib4_scores, fib5_scores) = match cfg.benchmark_labs {
        LabAggregation::Mean => (fib4_for_cohort(&test)?, fib5_for_cohort(&test)?),
        LabAggregation::Last => last_value_scores(cfg, &test, &cohort)?,
    };
    let auc_fib4 = index_auc(SerumIndex::Fib4, fib4_scores, FIB4_REPORTED_SENS_SPEC)?;
    let auc_fib5 = index_auc(SerumIndex::Fib5, fib5_scores, FIB5_REPORTED_SENS_SPEC)?;

    let metrics = EvalMetrics {
        window_years: cfg.window_years,
        n_test: test.n_rows(),
        n_test_cases: labels.iter().filter(|&&l| l).count(),
        auc_gbdt,
        auc_fib4,
        auc_fib5,
        operating_points: points,
    };
    let prov = cfg.provenance();
    write_roc_csv(&paths.roc, &curves, &prov)?;
    write_json(&paths.roc_plot, roc_plot_spec(&curves), &prov)?;
    write_json(&paths.metrics, serde_json::to_value(&metrics)?, &prov)?;
    characteristics_table(&matrix, &cohort)?.write_csv(&paths.characteristics, Some(&prov.comment()))?;
    Ok(metrics)
}

/// FIB-4 and FIB-5 from each test member's latest labs in the raw records.
fn last_value_scores(cfg: &RunConfig, test: &FeatureMatrix, cohort: &[CohortAssignment]) -> Result<(Vec<f64>, Vec<f64>)> {
    let records = load_records(cfg)?;
    let by_id: HashMap<&str, &CohortAssignment> = cohort.iter().map(|m| (m.patient_id.as_str(), m)).collect();
    let mut fib4 = Vec::with_capacity(test.n_rows());
    let mut fib5 = Vec::with_capacity(test.n_rows());
    for id in test.patient_ids() {
        let member = by_id
            .get(id.as_str())
            .ok_or_else(|| Error::Consistency(format!("feature row {id} is not in the cohort")))?;
        let panel = panel_from_records(&records, member, LabAggregation::Last)?;
        let tag = |e: Error| match e {
            Error::Domain(why) => Error::Domain(format!("patient {id}: {why}")),
            other => other,
        };
        fib4.push(SerumIndex::Fib4.score(&panel).map_err(tag)?);
        fib5.push(SerumIndex::Fib5.score(&panel).map_err(tag)?);
    }
    Ok((fib4, fib5))
}

fn write_roc_csv(path: &Path, curves: &[(&str, RocResult)], prov: &Provenance) -> Result<()> {
    let mut text = format!("# {}\nmethod,fpr,tpr\n", prov.comment());
    for (method, roc) in curves {
        for (fpr, tpr) in &roc.points {
            let _ = writeln!(text, "{method},{fpr},{tpr}");
        }
    }
    write_text(path, &text)
}

/// A Vega-Lite line chart of the curves with a chance diagonal.
fn roc_plot_spec(curves: &[(&str, RocResult)]) -> Value {
    let values: Vec<Value> = curves
        .iter()
        .flat_map(|(method, roc)| {
            let label = format!("{method} (AUC {:.3})", roc.auc);
            roc.points
                .iter()
                .map(move |&(fpr, tpr)| json!({ "method": label.clone(), "fpr": fpr, "tpr": tpr }))
        })
        .collect();
    json!({
        "$schema": "https://vega.github.io/schema/vega-lite/v5.json",
        "title": "ROC on the held-out partition",
        "width": 400,
        "height": 400,
        "layer": [
            {
                "data": { "values": values },
                "mark": { "type": "line", "interpolate": "step-after" },
                "encoding": {
                    "x": { "field": "fpr", "type": "quantitative", "title": "False positive rate" },
                    "y": { "field": "tpr", "type": "quantitative", "title": "True positive rate" },
                    "color": { "field": "method", "type": "nominal" }
                }
            },
            {
                "data": { "values": [ { "x": 0, "y": 0 }, { "x": 1, "y": 1 } ] },
                "mark": { "type": "line", "strokeDash": [4, 4], "color": "gray" },
                "encoding": {
                    "x": { "field": "x", "type": "quantitative" },
                    "y": { "field": "y", "type": "quantitative" }
                }
            }
        ]
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRow {
    pub window_years: u32,
    pub members: usize,
    pub auc_gbdt: f64,
    pub auc_fib4: f64,
    pub reference_gbdt: Option<f64>,
    pub reference_fib4: Option<f64>,
    pub window_violations: u64,
    pub events_consumed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateReport {
    pub rows: Vec<ReplicateRow>,
}

impl ReplicateReport {
    pub fn total_violations(&self) -> u64 {
        self.rows.iter().map(|r| r.window_violations).sum()
    }

    /// Plain-text comparison table.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "window  members  AUC gbdt  AUC fib4  | reference gbdt  reference fib4");
        for r in &self.rows {
            let rf = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
            let _ = writeln!(
                s,
                "{:>4}y  {:>7}  {:>8.3}  {:>8.3}  | {:>14}  {:>14}",
                r.window_years,
                r.members,
                r.auc_gbdt,
                r.auc_fib4,
                rf(r.reference_gbdt),
                rf(r.reference_fib4)
            );
        }
        s.push_str(
            "Synthetic AUCs depend on the generator settings; the reference columns come from the \
             original clinical cohort and are not expected to be reproduced.\n",
        );
        s
    }
}

/// Runs every stage for each window under `<output_dir>/window_<w>/`.
pub fn run_replicate(cfg: &RunConfig, windows: &[u32], threads: Option<usize>) -> Result<ReplicateReport> {
    if windows.is_empty() {
        return Err(Error::Config("no windows requested".into()));
    }
    ensure_dir(&cfg.output_dir)?;
    let mut rows = Vec::with_capacity(windows.len());
    for &w in windows {
        let dir = cfg.output_dir.join(format!("window_{w}"));
        let run = RunConfig {
            data_dir: dir.join("data"),
            output_dir: dir,
            window_years: w,
            generator: cfg.generator.clone().filter(|g| g.window_years == w),
            ..cfg.clone()
        }
        .resolve()?;
        run_generate(&run)?;
        let cohort = run_cohort(&run)?;
        let assembly = run_features(&run)?;
        run_train(&run, threads)?;
        let metrics = run_eval(&run, EvalMode::Full)?;
        let reference = REFERENCE_AUCS.iter().find(|r| r.0 == w);
        rows.push(ReplicateRow {
            window_years: w,
            members: cohort.complete_case_cases + cohort.complete_case_controls,
            auc_gbdt: metrics.auc_gbdt.expect("full evaluation"),
            auc_fib4: metrics.auc_fib4,
            reference_gbdt: reference.map(|r| r.1),
            reference_fib4: reference.map(|r| r.2),
            window_violations: assembly.window_violations,
            events_consumed: assembly.events_consumed,
        });
    }
    let report = ReplicateReport { rows };
    let prov = cfg.provenance();
    write_json(&cfg.output_dir.join("replicate.json"), serde_json::to_value(&report)?, &prov)?;
    write_text(
        &cfg.output_dir.join("replicate.txt"),
        &format!("# {}\n{}", prov.comment(), report.render()),
    )?;
    Ok(report)
}

/// Scores a standalone input file and writes
/// `patient_id,score,classification`. Returns the number of rows scored.
pub fn run_score(index: SerumIndex, input: &Path, output: &Path, cutoff: Option<f64>) -> Result<usize> {
    require(input)?;
    let rows = read_score_input(input)?;
    let cutoff = cutoff.unwrap_or(index.default_cutoff());
    let mut text = format!("# tool={} index={}\npatient_id,score,classification\n", TOOL_VERSION.replace(' ', "/"), index.name());
    for row in &rows {
        let score = index.score(&row.panel()).map_err(|e| match e {
            Error::Domain(why) => Error::Domain(format!("patient {}: {why}", row.patient_id)),
            other => other,
        })?;
        let class = classify_cutoff(score, cutoff, index.default_direction());
        let _ = writeln!(text, "{},{score},{}", row.patient_id, class.as_str());
    }
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_text(output, &text)?;
    Ok(rows.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_every_setting() {
        let a = RunConfig::default().resolve().unwrap();
        let mut b = a.clone();
        b.gbdt.max_depth += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), RunConfig::default().resolve().unwrap().hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn resolve_propagates_seed_and_window() {
        let cfg = RunConfig {
            seed: 11,
            window_years: 3,
            ..RunConfig::default()
        }
        .resolve()
        .unwrap();
        assert_eq!((cfg.cohort.rng_seed, cfg.gbdt.rng_seed, cfg.cohort.window_years), (11, 11, 3));
        assert_eq!(cfg.generator_config().window_years, 3);
    }

    #[test]
    fn bad_json_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        fs::write(&p, "{\n  \"seed\": 7,\n  oops\n}").unwrap();
        match RunConfig::from_json_file(&p) {
            Err(Error::Config(msg)) => assert!(msg.contains("line 3"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        fs::write(&p, r#"{"seed": 1, "sed": 2}"#).unwrap();
        assert!(matches!(RunConfig::from_json_file(&p), Err(Error::Config(_))));
    }

    #[test]
    fn missing_stage_inputs_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            data_dir: dir.path().join("data"),
            output_dir: dir.path().join("out"),
            ..RunConfig::default()
        };
        match run_features(&cfg) {
            Err(Error::MissingDependency(p)) => assert!(p.ends_with("cohort.csv")),
            other => panic!("{other:?}"),
        }
    }
}
