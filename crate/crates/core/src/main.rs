use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cirrhosis_horizon::baseline::{LabAggregation, SerumIndex};
use cirrhosis_horizon::pipeline::{self, EvalMode, RunConfig};
use cirrhosis_horizon::synth::default_config;
use cirrhosis_horizon::Error;

/// Incident cirrhosis risk modelling on structured EHR extracts.
///
/// Exit codes: 0 success, 1 data or model error, 2 configuration error,
/// 3 missing stage input, 4 I/O failure.
#[derive(Debug, Parser)]
#[command(name = "cirrhosis-horizon", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Options mirroring the keys of the run configuration. Flags win over the
/// file; `CH_SEED` wins over both for the seed.
#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory with the five record CSVs.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Directory for stage outputs.
    #[arg(long = "out", global = true)]
    output_dir: Option<PathBuf>,
    /// Prediction window in years.
    #[arg(long = "window", global = true)]
    window_years: Option<u32>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    test_fraction: Option<f64>,
    /// Split without stratifying by label.
    #[arg(long, global = true)]
    no_stratify: bool,
    /// Lab reduction for the FIB-4/FIB-5 benchmark.
    #[arg(long, value_enum, global = true)]
    labs: Option<Labs>,
    /// Worker threads for training. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a calibrated synthetic record set.
    Generate {
        /// Write the generator settings as JSON to this file and exit.
        #[arg(long)]
        dump_config: Option<PathBuf>,
    },
    /// Select cases and matched controls.
    Cohort,
    /// Aggregate observation windows into a feature matrix.
    Features,
    /// Fit the boosted-tree model on the training partition.
    Train {
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        max_depth: Option<usize>,
    },
    /// Score the held-out partition.
    Eval {
        /// Evaluate only this serum-index benchmark; no model is required.
        #[arg(long, value_enum)]
        benchmark: Option<Benchmark>,
    },
    /// Run every stage for several windows and compare AUCs.
    Replicate {
        #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 3])]
        windows: Vec<u32>,
    },
    /// Compute FIB-4 or FIB-5 for a CSV of patients.
    Score {
        #[arg(value_enum)]
        index: ScoreIndex,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Override the default cutoff.
        #[arg(long)]
        cutoff: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Benchmark {
    Fib4,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Labs {
    /// Window mean, as used for the model's features.
    Mean,
    /// Latest value on or before the prediction point.
    Last,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScoreIndex {
    Fib4,
    Fib5,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::MissingDependency(_) => 3,
        Error::Io { .. } => 4,
        _ => 1,
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &common.data_dir {
        cfg.data_dir = d.clone();
    }
    if let Some(d) = &common.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(w) = common.window_years {
        cfg.window_years = w;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(f) = common.test_fraction {
        cfg.split.test_fraction = f;
    }
    if common.no_stratify {
        cfg.split.stratify = false;
    }
    match common.labs {
        Some(Labs::Mean) => cfg.benchmark_labs = LabAggregation::Mean,
        Some(Labs::Last) => cfg.benchmark_labs = LabAggregation::Last,
        None => {}
    }
    cfg.with_env_seed()
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Command::Score {
        index,
        input,
        output,
        cutoff,
    } = &cli.command
    {
        let index = match index {
            ScoreIndex::Fib4 => SerumIndex::Fib4,
            ScoreIndex::Fib5 => SerumIndex::Fib5,
        };
        let n = pipeline::run_score(index, input, output, *cutoff)?;
        println!("scored {n} rows into {}", output.display());
        return Ok(());
    }

    let mut cfg = load_config(&cli.common)?;
    if let Command::Train {
        rounds,
        learning_rate,
        max_depth,
    } = &cli.command
    {
        if let Some(r) = rounds {
            cfg.gbdt.num_rounds = *r;
        }
        if let Some(l) = learning_rate {
            cfg.gbdt.learning_rate = *l;
        }
        if let Some(d) = max_depth {
            cfg.gbdt.max_depth = *d;
        }
    }
    let threads = cli.common.threads;

    match cli.command {
        Command::Generate { dump_config: Some(path) } => {
            let window = cfg.window_years;
            let gen = cfg.generator.clone().unwrap_or_else(|| default_config(window));
            std::fs::write(&path, gen.to_json()).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            println!("wrote generator settings to {}", path.display());
        }
        Command::Generate { dump_config: None } => {
            let cfg = cfg.resolve()?;
            let s = pipeline::run_generate(&cfg)?;
            println!(
                "generated {} patients ({} cases, {} controls) in {}",
                s.patients,
                s.cases,
                s.controls,
                cfg.data_dir.display()
            );
        }
        Command::Cohort => {
            let r = pipeline::run_cohort(&cfg.resolve()?)?;
            println!(
                "cohort: {} cases, {} matched controls ({} cases and {} controls complete)",
                r.lc_patients, r.matched_controls, r.complete_case_cases, r.complete_case_controls
            );
        }
        Command::Features => {
            let r = pipeline::run_features(&cfg.resolve()?)?;
            println!(
                "features: {} rows, {} events consumed, {} window violations",
                r.rows, r.events_consumed, r.window_violations
            );
        }
        Command::Train { .. } => {
            let s = pipeline::run_train(&cfg.resolve()?, threads)?;
            println!(
                "trained {} trees on {} rows (final train loss {:.4})",
                s.trees, s.n_train, s.final_train_loss
            );
        }
        Command::Eval { benchmark } => {
            let mode = if benchmark.is_some() {
                EvalMode::BenchmarkOnly
            } else {
                EvalMode::Full
            };
            let m = pipeline::run_eval(&cfg.resolve()?, mode)?;
            if let Some(a) = m.auc_gbdt {
                println!("AUC gbdt {a:.3}");
            }
            println!("AUC fib4 {:.3}", m.auc_fib4);
            println!("AUC fib5 {:.3}", m.auc_fib5);
        }
        Command::Replicate { windows } => {
            let report = pipeline::run_replicate(&cfg.resolve()?, &windows, threads)?;
            print!("{}", report.render());
            if report.total_violations() != 0 {
                return Err(Error::Consistency("post-prediction events reached the features".into()));
            }
        }
        Command::Score { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
