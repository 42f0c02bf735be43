//! Criterion checks shared by the focused test files and the acceptance
//! suite. Each returns a one-line summary on success and a reason on failure.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;

use cirrhosis_horizon::baseline::{fib4, fib5, SerumPanel};
use cirrhosis_horizon::cohort::{build_cohort, CohortSpec, Label};
use cirrhosis_horizon::ehr::{load_record_set, write_record_set, IcdCode, IcdVersion, LoadOptions, RecordPaths};
use cirrhosis_horizon::features::{assemble_matrix, CategoricalGroup, ColumnKind, FeatureMatrix};
use cirrhosis_horizon::gbdt::{
    find_best_split, leaf_weight, logistic_grad_hess, train_columns, train_with, Direction, GbdtModel, GbdtParams,
    TrainOptions,
};
use cirrhosis_horizon::pipeline::{self, EvalMode, ReplicateReport, RunConfig};
use cirrhosis_horizon::stats::{chi_square_p, roc_auc, stratified_split, welch_t_p};
use cirrhosis_horizon::synth::{default_config, generate, GeneratedData, GeneratorConfig};
use cirrhosis_horizon::terminology::{cci_for_diagnoses, Terminology, BUILTIN_CHARLSON_CSV};

use super::{audit_matching, brute_force_cci, brute_force_split, concordance, parse_charlson, rng, tied_instance};

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Trapezoidal AUC against pairwise concordance on tie-heavy instances.
pub fn auc_matches_concordance(instances: usize) -> Check {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let (scores, labels) = tied_instance(&mut r);
        let auc = roc_auc(&scores, &labels).map_err(|e| format!("instance {i}: {e}"))?.auc;
        let diff = (auc - concordance(&scores, &labels)).abs();
        worst = worst.max(diff);
        ensure(diff <= 1e-9, || format!("instance {i}: |AUC - concordance| = {diff:e}"))?;
    }
    Ok(format!("{instances} instances, max deviation {worst:e}"))
}

fn panel(age: f64, ast: f64, alt: f64, plt: f64, alb: f64, alp: f64) -> SerumPanel {
    SerumPanel {
        age_years: age,
        ast_u_per_l: ast,
        alt_u_per_l: alt,
        platelets_1e9_per_l: plt,
        albumin_g_per_dl: alb,
        alp_u_per_l: alp,
    }
}

/// FIB-4 hand value, its AST/platelet scale invariance, and FIB-5 slopes.
pub fn serum_indices_exact() -> Check {
    let hand = fib4(&panel(61.0, 80.0, 49.0, 150.0, 4.0, 90.0)).map_err(|e| e.to_string())?;
    // 61 * 80 / (150 * 7) = 4880 / 1050
    let expected = 4880.0 / 1050.0;
    ensure((hand - expected).abs() < 1e-9, || format!("FIB-4 hand example gave {hand}"))?;

    let mut r = rng(3);
    for _ in 0..1000 {
        let p = panel(
            r.gen_range(18.0..90.0),
            r.gen_range(5.0..400.0),
            r.gen_range(5.0..400.0),
            r.gen_range(20.0..600.0),
            r.gen_range(1.0..6.0),
            r.gen_range(20.0..400.0),
        );
        let k = r.gen_range(0.1..10.0);
        let scaled = SerumPanel {
            ast_u_per_l: p.ast_u_per_l * k,
            platelets_1e9_per_l: p.platelets_1e9_per_l * k,
            ..p
        };
        let (a, b) = (fib4(&p).unwrap(), fib4(&scaled).unwrap());
        ensure((a - b).abs() <= 1e-12 * a.abs().max(1.0), || format!("scale invariance broke: {a} vs {b}"))?;

        // Exact linearity: unit steps move the score by the coefficient.
        let base = fib5(&p).unwrap();
        let step = |q: SerumPanel| fib5(&q).unwrap() - base;
        let slopes = [
            ("albumin (g/dL)", step(SerumPanel { albumin_g_per_dl: p.albumin_g_per_dl + 1.0, ..p }), 0.3 * 10.0),
            ("platelets", step(SerumPanel { platelets_1e9_per_l: p.platelets_1e9_per_l + 1.0, ..p }), 0.05),
            ("ALP", step(SerumPanel { alp_u_per_l: p.alp_u_per_l + 1.0, ..p }), -0.014),
        ];
        for (name, got, want) in slopes {
            ensure((got - want).abs() <= 1e-12 * base.abs().max(10.0), || {
                format!("FIB-5 slope for {name}: {got} vs {want}")
            })?;
        }
        // AST/ALT ratio: double AST at fixed ALT adds exactly one ratio unit.
        let ratio = p.ast_u_per_l / p.alt_u_per_l;
        let got = step(SerumPanel { ast_u_per_l: p.ast_u_per_l * 2.0, ..p }) / ratio;
        ensure((got + 6.0).abs() <= 1e-10, || format!("FIB-5 ratio slope {got}"))?;
    }
    Ok(format!("FIB-4(61, 80, 150, 49) = {hand:.9}; invariance and FIB-5 slopes hold on 1000 panels"))
}

/// Shipped Charlson mapping against a table scan on random code sets.
pub fn cci_matches_table_scan(sets: usize) -> Check {
    let table = parse_charlson(BUILTIN_CHARLSON_CSV);
    let map = Terminology::builtin().charlson;
    let mut r = rng(4);
    let mut with_hierarchy = 0;
    for i in 0..sets {
        let k = r.gen_range(0..=8);
        let mut codes = Vec::new();
        for _ in 0..k {
            let row = &table[r.gen_range(0..table.len())];
            let mut code = row.prefix.clone();
            for _ in 0..r.gen_range(0..=2) {
                code.push(char::from(b'0' + r.gen_range(0..10u8)));
            }
            codes.push((row.version, code));
        }
        // Sprinkle in codes that match nothing.
        if r.gen_bool(0.3) {
            codes.push((10, "Z00".to_string()));
        }
        let typed: Vec<IcdCode> = codes
            .iter()
            .map(|(v, c)| IcdCode::new(c, if *v == 9 { IcdVersion::Icd9 } else { IcdVersion::Icd10 }).unwrap())
            .collect();
        let got = cci_for_diagnoses(&map, typed.iter());
        let want = brute_force_cci(&table, &codes);
        ensure(got == want, || format!("set {i} {codes:?}: {got} vs oracle {want}"))?;
        let cats: Vec<&str> = table
            .iter()
            .filter(|row| codes.iter().any(|(v, c)| *v == row.version && c.starts_with(&row.prefix)))
            .map(|row| row.category.as_str())
            .collect();
        let pairs = [
            ("diabetes_with_complication", "diabetes_without_complication"),
            ("moderate_or_severe_liver_disease", "mild_liver_disease"),
            ("metastatic_solid_tumor", "malignancy"),
        ];
        if pairs.iter().any(|(a, b)| cats.contains(a) && cats.contains(b)) {
            with_hierarchy += 1;
        }
    }
    Ok(format!("{sets} random sets agree exactly ({with_hierarchy} exercised hierarchy suppression)"))
}

/// Analytic logistic derivatives against central finite differences of an
/// independently written loss.
pub fn gradients_match_finite_differences(points: usize) -> Check {
    let loss = |s: f64, y: f64| {
        let p = 1.0 / (1.0 + (-s).exp());
        -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
    };
    let mut r = rng(5);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let s = r.gen_range(-8.0..8.0);
        let y: u8 = r.gen_range(0..=1);
        let yf = f64::from(y);
        let (g, hess) = logistic_grad_hess(s, y);
        let fd_g = (loss(s + h, yf) - loss(s - h, yf)) / (2.0 * h);
        let fd_h = (logistic_grad_hess(s + h, y).0 - logistic_grad_hess(s - h, y).0) / (2.0 * h);
        let d = (g - fd_g).abs().max((hess - fd_h).abs());
        worst = worst.max(d);
        ensure(d < 1e-6, || format!("at s={s}, y={y}: grad {g} vs {fd_g}, hess {hess} vs {fd_h}"))?;
    }
    Ok(format!("{points} points, max deviation {worst:e}"))
}

/// Training loss never increases on a linearly separable toy set.
pub fn separable_objective_non_increasing() -> Check {
    let n = 60;
    let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let noise: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64).collect();
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i >= 25)).collect();
    let params = GbdtParams {
        num_rounds: 100,
        ..GbdtParams::default()
    };
    let (_, raw, history) = train_columns(&[x, noise], &labels, vec!["a".into(), "b".into()], &params)
        .map_err(|e| e.to_string())?;
    let pos = 35.0_f64;
    let base = (pos / (n as f64 - pos)).ln();
    let base_loss = labels
        .iter()
        .map(|&y| if y == 1 { (1.0 + (-base).exp()).ln() } else { (1.0 + base.exp()).ln() })
        .sum::<f64>()
        / n as f64;
    let mut prev = base_loss;
    for h in &history {
        ensure(h.train_loss <= prev, || format!("round {} loss {} > previous {prev}", h.round, h.train_loss))?;
        prev = h.train_loss;
    }
    let separated = raw.iter().zip(&labels).all(|(&s, &y)| (s > 0.0) == (y == 1));
    ensure(separated, || "final scores do not separate the classes".into())?;
    Ok(format!("{} rounds, loss {base_loss:.4} -> {prev:.2e}", history.len()))
}

fn same_split(ours: &cirrhosis_horizon::gbdt::SplitCandidate, oracle: &super::OracleSplit) -> bool {
    ours.feature == oracle.feature
        && ours.threshold == oracle.threshold
        && (ours.default_direction == Direction::Left) == oracle.missing_left
}

/// `find_best_split` against exhaustive enumeration on random matrices up
/// to 64 x 8. Half use dyadic statistics so that tied gains are exact and
/// the tie rule itself is exercised.
pub fn split_matches_brute_force(matrices: usize) -> Check {
    let mut r = rng(6);
    let mut exact_ties = 0;
    for m in 0..matrices {
        let dyadic = m % 2 == 0;
        let n = r.gen_range(2..=64);
        let d = r.gen_range(1..=8);
        let levels = r.gen_range(2..=12);
        let mut columns: Vec<Vec<f64>> = (0..d)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        if r.gen_bool(0.1) {
                            f64::NAN
                        } else if dyadic {
                            r.gen_range(0..levels) as f64
                        } else {
                            r.gen_range(-5.0..5.0)
                        }
                    })
                    .collect()
            })
            .collect();
        if dyadic && d > 1 && r.gen_bool(0.5) {
            columns[d - 1] = columns[0].clone();
        }
        let (grad, hess): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|_| {
                if dyadic {
                    (r.gen_range(-8..=8) as f64 / 8.0, r.gen_range(1..=8) as f64 / 16.0)
                } else {
                    (r.gen_range(-1.0..1.0), r.gen_range(0.01..0.25))
                }
            })
            .unzip();
        let rows: Vec<usize> = (0..n).filter(|_| r.gen_bool(0.9)).collect();
        let params = GbdtParams {
            lambda: [0.0, 1.0, 2.5][m % 3],
            gamma: if m % 5 == 0 { 0.05 } else { 0.0 },
            min_child_weight: [0.0, 0.1, 0.5][m % 3],
            ..GbdtParams::default()
        };
        let features: Vec<usize> = (0..d).collect();
        let ours = find_best_split(&columns, &grad, &hess, &rows, &features, &params);
        let oracle = brute_force_split(
            &columns,
            &grad,
            &hess,
            &rows,
            params.lambda,
            params.gamma,
            params.min_child_weight,
        );
        match (ours, oracle) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                ensure((a.gain - b.gain).abs() <= 1e-10, || format!("matrix {m}: gain {} vs {}", a.gain, b.gain))?;
                ensure(same_split(&a, &b), || format!("matrix {m}: chose {a:?}, oracle {b:?}"))?;
                if dyadic && d > 1 && columns[d - 1] == columns[0] && b.feature == 0 {
                    exact_ties += 1;
                }
            }
            (a, b) => return Err(format!("matrix {m}: ours {a:?}, oracle {b:?}")),
        }
    }
    Ok(format!("{matrices} matrices agree ({exact_ties} with an exactly tied duplicate feature)"))
}

pub fn leaf_weight_example() -> Check {
    let w = leaf_weight(-2.0, 4.0, 1.0).map_err(|e| e.to_string())?;
    ensure(w == 0.4, || format!("leaf weight {w}"))?;
    Ok("G=-2, H=4, lambda=1 gives 0.4".into())
}

/// A small generated cohort as a feature matrix.
pub fn small_matrix(n_cases: usize, n_controls: usize, seed: u64) -> FeatureMatrix {
    let config = GeneratorConfig {
        n_cases,
        n_controls,
        rng_seed: seed,
        ..default_config(1)
    };
    let data = generate(&config).unwrap();
    let spec = CohortSpec {
        rng_seed: seed,
        ..CohortSpec::with_window(1)
    };
    let (members, _) = build_cohort(&data.records, &spec).unwrap();
    assemble_matrix(&data.records, &members, &Terminology::builtin()).unwrap().0
}

/// Identical model JSON across repeated runs and worker counts.
pub fn training_is_deterministic(matrix: &FeatureMatrix) -> Check {
    let params = GbdtParams {
        num_rounds: 60,
        subsample: 0.8,
        colsample: 0.7,
        rng_seed: 9,
        ..GbdtParams::default()
    };
    let fit = |threads| {
        train_with(
            matrix,
            &params,
            &TrainOptions {
                threads: Some(threads),
                early_stopping: None,
            },
        )
        .map(|o| o.model.to_json())
        .map_err(|e| e.to_string())
    };
    let a = fit(1)?;
    let b = fit(1)?;
    let c = fit(4)?;
    ensure(a == b, || "two single-thread runs differ".into())?;
    ensure(a == c, || "1 and 4 workers differ".into())?;
    Ok(format!("{} bytes identical across two runs and 1 vs 4 workers", a.len()))
}

pub fn statistics_kernels() -> Check {
    let chi = chi_square_p(&[vec![10, 20], vec![20, 10]]).map_err(|e| e.to_string())?;
    ensure((chi.statistic - 20.0 / 3.0).abs() < 1e-3, || format!("chi-square statistic {}", chi.statistic))?;
    // Independent survivor function: for 1 df, P(X > x) = erfc(sqrt(x / 2)).
    let oracle = statrs::function::erf::erfc((chi.statistic / 2.0).sqrt());
    ensure((chi.p - oracle).abs() < 1e-4 && (chi.p - 0.00982).abs() < 1e-4, || {
        format!("chi-square p {} vs oracle {oracle}", chi.p)
    })?;
    let w = welch_t_p(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).map_err(|e| e.to_string())?;
    ensure((w.t + 1.549).abs() < 1e-3 && (w.df - 2.941).abs() < 1e-3, || format!("Welch t {} df {}", w.t, w.df))?;
    let labels = [true, true, true, true, false, false, false, false, false, false];
    let (_, test) = stratified_split(&labels, 0.3, 1).map_err(|e| e.to_string())?;
    let cases = test.iter().filter(|&&i| labels[i]).count();
    ensure((cases, test.len() - cases) == (1, 2), || format!("stratified test has {cases} cases of {}", test.len()))?;
    Ok(format!(
        "chi2 {:.4} (p {:.5}), Welch t {:.3} df {:.3}, split test (1, 2)",
        chi.statistic, chi.p, w.t, w.df
    ))
}

/// Generated marginals recovered from the assembled features of each group.
pub fn generator_calibration(per_group: usize) -> Check {
    let config = GeneratorConfig {
        n_cases: per_group,
        n_controls: per_group,
        rng_seed: 21,
        ..default_config(1)
    };
    let data: GeneratedData = generate(&config).map_err(|e| e.to_string())?;
    let cohort = data.truth_cohort(1);
    let (matrix, _) = assemble_matrix(&data.records, &cohort, &Terminology::builtin()).map_err(|e| e.to_string())?;
    let schema = matrix.schema().clone();
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for label in [Label::Case, Label::Control] {
        let rows: Vec<usize> = (0..matrix.n_rows())
            .filter(|&r| (matrix.labels()[r] == 1) == label.is_case())
            .collect();
        let spec = config.effective(label);
        for (key, target) in &spec.continuous {
            let kind = match key.as_str() {
                "age" => ColumnKind::Age,
                "cci" => ColumnKind::CciMean,
                other => ColumnKind::parse(&format!("vital_{other}"))
                    .or_else(|| ColumnKind::parse(&format!("lab_{other}")))
                    .ok_or_else(|| format!("no column for {other}"))?,
            };
            let c = schema.require(&kind).map_err(|e| e.to_string())?;
            let xs: Vec<f64> = rows.iter().filter_map(|&r| matrix.get(r, c)).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let z = (mean - target.mean) / (sd / n.sqrt());
            worst = worst.max(z.abs());
            ensure(z.abs() <= 3.0, || {
                format!("{} {key}: mean {mean:.3} vs target {} (z = {z:.2})", label.as_str(), target.mean)
            })?;
            checked += 1;
        }
        for group in CategoricalGroup::ALL {
            let props = &spec.categorical[group.key()];
            let levels = group.levels();
            for level in &levels {
                let p: f64 = props
                    .iter()
                    .filter(|(l, _)| if levels.contains(l) { *l == level } else { level == "Unknown" })
                    .map(|(_, p)| p)
                    .sum();
                let c = schema
                    .require(&ColumnKind::OneHot(group, level.clone()))
                    .map_err(|e| e.to_string())?;
                let share = rows.iter().filter(|&&r| matrix.get(r, c) == Some(1.0)).count() as f64 / rows.len() as f64;
                let se = (p * (1.0 - p) / rows.len() as f64).sqrt();
                let ok = if se == 0.0 { share == p } else { ((share - p) / se).abs() <= 3.0 };
                ensure(ok, || format!("{} {}={level}: {share:.4} vs {p:.4}", label.as_str(), group.key()))?;
                checked += 1;
            }
        }
        for (&id, &p) in &spec.ccs_prevalence {
            let c = schema.require(&ColumnKind::Ccs(id)).map_err(|e| e.to_string())?;
            let share = rows.iter().filter(|&&r| matrix.get(r, c) == Some(1.0)).count() as f64 / rows.len() as f64;
            let se = (p * (1.0 - p) / rows.len() as f64).sqrt();
            ensure(se == 0.0 && share == p || ((share - p) / se).abs() <= 3.0, || {
                format!("{} CCS {id}: {share:.4} vs {p:.4}", label.as_str())
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} targets recovered with n = {per_group} per group (max |z| for means {worst:.2})"))
}

/// Full default replicate run with seed 7.
pub struct ReplicateRun {
    pub dir: tempfile::TempDir,
    pub config: RunConfig,
    pub report: ReplicateReport,
    pub elapsed: Duration,
}

pub fn replicate_default() -> Result<ReplicateRun, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = RunConfig {
        output_dir: dir.path().to_path_buf(),
        seed: 7,
        ..RunConfig::default()
    };
    let start = Instant::now();
    let report = pipeline::run_replicate(&config, &[1, 2, 3], None).map_err(|e| e.to_string())?;
    Ok(ReplicateRun {
        dir,
        config,
        report,
        elapsed: start.elapsed(),
    })
}

pub fn replicate_outperforms_fib4(run: &ReplicateRun) -> Check {
    let mut cells = Vec::new();
    for row in &run.report.rows {
        ensure(row.auc_gbdt >= row.auc_fib4 + 0.02, || {
            format!("window {}: GBDT {:.3} vs FIB-4 {:.3}", row.window_years, row.auc_gbdt, row.auc_fib4)
        })?;
        if row.window_years == 1 {
            ensure(row.auc_gbdt >= 0.70, || format!("1-year GBDT AUC {:.3}", row.auc_gbdt))?;
        }
        cells.push(format!("{}y {:.3} vs {:.3}", row.window_years, row.auc_gbdt, row.auc_fib4));
    }
    ensure(run.elapsed < Duration::from_secs(120), || format!("replicate took {:?}", run.elapsed))?;
    Ok(format!("{} in {:.1}s", cells.join(", "), run.elapsed.as_secs_f64()))
}

pub fn no_leakage(run: &ReplicateRun) -> Check {
    let consumed: u64 = run.report.rows.iter().map(|r| r.events_consumed).sum();
    let violations = run.report.total_violations();
    ensure(violations == 0, || format!("{violations} post-prediction events consumed"))?;
    ensure(consumed > 0, || "guard observed no events".into())?;
    Ok(format!("0 violations among {consumed} consumed events"))
}

pub fn matching_contract(run: &ReplicateRun) -> Check {
    let mut parts = Vec::new();
    for row in &run.report.rows {
        let w = run.dir.path().join(format!("window_{}", row.window_years));
        let audit = audit_matching(&w.join("cohort.csv"), &w.join("data/encounters.csv"), 7, 5)?;
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(w.join("report.json")).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
        let pre = report["max_controls_per_case_before_dedup"].as_u64().unwrap_or(u64::MAX);
        ensure(pre <= 5, || format!("window {}: {pre} controls drawn for one case", row.window_years))?;
        ensure(audit.controls > 0, || "no controls to audit".into())?;
        parts.push(format!("{}y {} controls", row.window_years, audit.controls));
    }
    Ok(format!("all within 7 days, <= 5 per case, unique ({})", parts.join(", ")))
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = walk(dir)
        .into_iter()
        .map(|p| (p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

/// Record-set and model round-trips, and byte-identical stage reruns.
pub fn round_trips(run: &ReplicateRun) -> Check {
    let w = run.dir.path().join("window_1");
    let cfg = RunConfig {
        data_dir: w.join("data"),
        output_dir: w.clone(),
        window_years: 1,
        ..run.config.clone()
    }
    .resolve()
    .map_err(|e| e.to_string())?;

    let (records, _) = load_record_set(&RecordPaths::in_dir(&cfg.data_dir), LoadOptions::default()).map_err(|e| e.to_string())?;
    let copy = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_record_set(&records, copy.path(), None).map_err(|e| e.to_string())?;
    let (again, _) = load_record_set(&RecordPaths::in_dir(copy.path()), LoadOptions::default()).map_err(|e| e.to_string())?;
    ensure(records == again, || "record set changed across a CSV round-trip".into())?;

    let model = pipeline::read_model(&w.join("model.json")).map_err(|e| e.to_string())?;
    let back = GbdtModel::from_json(&model.to_json()).map_err(|e| e.to_string())?;
    ensure(model == back, || "model changed across a JSON round-trip".into())?;

    let before = snapshot(&w);
    pipeline::run_generate(&cfg).map_err(|e| e.to_string())?;
    pipeline::run_cohort(&cfg).map_err(|e| e.to_string())?;
    pipeline::run_features(&cfg).map_err(|e| e.to_string())?;
    pipeline::run_train(&cfg, Some(2)).map_err(|e| e.to_string())?;
    pipeline::run_eval(&cfg, EvalMode::Full).map_err(|e| e.to_string())?;
    let after = snapshot(&w);
    ensure(before.len() == after.len(), || "rerun changed the set of files".into())?;
    for ((name, a), (_, b)) in before.iter().zip(&after) {
        ensure(a == b, || format!("{name} changed on rerun"))?;
    }
    Ok(format!(
        "records ({} patients) and model round-trip; {} files byte-identical after rerunning every stage",
        records.patients().len(),
        before.len()
    ))
}
