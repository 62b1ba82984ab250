//! Command-line front end: experiment configs, runs, sweeps and reports.

mod config;
mod run;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use config::{DataSource, ExperimentConfig, Hyper, ModelKind, Preprocess, Relabel};
pub use run::{
    kernel_error, prepare, run_experiment, run_seed, run_sweep, stat, summarize, sweep_csv, with_param, ModelFile,
    NodeReport, Prepared, Preprocessor, RunReport, SeedReport, SeedRun, Stat, Summary, SweepRow, TrainedModel,
    SWEEP_PARAMS,
};

use crate::data::{self, DlpConcept};
use crate::error::{QfError, Result};
use crate::qsim::EmbeddingSpec;
use crate::rng::RngKey;
use crate::verify;

#[derive(Debug, Parser)]
#[command(name = "qforest", version, about = "Quantum random forests on a simulated kernel backend")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train and score a model for every seed in a config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run this seed only.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured model.
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
    },
    /// Score a saved model on a labelled CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Vary one hyperparameter over a list of values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of L, M, C, d, T, N_p.
        #[arg(long)]
        param: String,
        /// Comma-separated values; `exact` is allowed for M.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
    },
    /// Check Nyström and split-function behaviour under shot noise.
    Verify {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of seeds per experiment.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
    /// Normalise a CSV and replace its labels with kernel-derived ones.
    Relabel {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        method: RelabelArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Reduce to this many principal components first.
        #[arg(long)]
        pca: Option<usize>,
        /// RBF width for `qk`; `1/D` when omitted.
        #[arg(long)]
        gamma: Option<f64>,
        /// Label noise for `qk`.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Class count for `bands`.
        #[arg(long, default_value_t = 4)]
        classes: usize,
    },
    /// Generate a discrete-log concept dataset.
    GenDlp {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        g: u64,
        #[arg(long, default_value_t = 1)]
        q: u32,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s0: Option<u64>,
        #[arg(long)]
        s1: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Qrf,
    Qsvm,
    Crf,
    RbfSvm,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Qrf => ModelKind::Qrf,
            ModelArg::Qsvm => ModelKind::Qsvm,
            ModelArg::Crf => ModelKind::Crf,
            ModelArg::RbfSvm => ModelKind::RbfSvm,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum RelabelArg {
    Qk,
    Qrf,
    Bands,
}

/// Sizes the global rayon pool from `QFOREST_THREADS`, if set.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("QFOREST_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| QfError::Config {
        path: "QFOREST_THREADS".into(),
        message: format!("expected a thread count, got {v:?}"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| QfError::InvalidInput(format!("thread pool: {e}")))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("runs"))
}

fn load_config(path: &Path, seed: Option<u64>, model: Option<ModelArg>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(m) = model {
        cfg.model = m.into();
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct EvalReport {
    n: usize,
    accuracy: f64,
    predictions: Vec<String>,
}

/// Runs a parsed command; the returned code is the process exit status.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Train { config, out, seed, model } => {
            let cfg = load_config(&config, seed, model)?;
            let dir = out_dir(out, &cfg);
            let (report, models) = run_experiment(&cfg)?;
            for m in &models {
                write_json(&dir.join(format!("model_seed{}.json", m.seed)), m)?;
            }
            write_json(&dir.join("report.json"), &report)?;
            for r in &report.runs {
                println!("seed {:>6}  train {:.4}  test {:.4}", r.seed, r.train_accuracy, r.test_accuracy);
            }
            let s = &report.summary;
            println!(
                "test accuracy {:.4} ± {:.4} over {} seeds; report in {}",
                s.test_accuracy.mean,
                s.test_accuracy.std,
                report.runs.len(),
                dir.display()
            );
            Ok(0)
        }
        Command::Eval { model, data: path, out } => {
            let file = ModelFile::load(&model)?;
            let ds = data::load_csv(&path)?;
            // Map the CSV's own label values onto the model's class indices.
            let truth = ds
                .labels
                .iter()
                .map(|&l| {
                    let name = &ds.meta.class_names[l];
                    file.class_names.iter().position(|c| c == name).ok_or_else(|| {
                        QfError::InvalidInput(format!("label {name:?} is not a class of the model"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let pred = file.predict_raw(ds.features.view())?;
            let report = EvalReport {
                n: pred.len(),
                accuracy: crate::forest::accuracy(&pred, &truth)?,
                predictions: pred.iter().map(|&p| file.class_names[p].clone()).collect(),
            };
            println!("accuracy {:.4} on {} rows", report.accuracy, report.n);
            if let Some(out) = out {
                write_json(&out, &report)?;
            }
            Ok(0)
        }
        Command::Sweep { config, param, values, out, model } => {
            let cfg = load_config(&config, None, model)?;
            let dir = out_dir(out, &cfg);
            let rows = run_sweep(&cfg, &param, &values)?;
            let text = sweep_csv(&rows)?;
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join(format!("sweep_{param}.csv")), &text)?;
            for r in rows.iter().filter(|r| r.seed == "mean") {
                println!("{param}={:<8} test {:.4}  train {:.4}", r.value, r.test_accuracy, r.train_accuracy);
            }
            Ok(0)
        }
        Command::Verify { out, seeds } => {
            let harness = crate::nystrom::HarnessConfig { seeds: (0..seeds).collect(), ..verify::default_harness() };
            let proxy = verify::ProxyConfig { seeds: (0..seeds).collect(), ..Default::default() };
            let report = verify::run_verify(&harness, &proxy)?;
            for c in &report.checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if let Some(dir) = out {
                write_json(&dir.join("verify.json"), &report)?;
                std::fs::write(dir.join("harness.csv"), crate::nystrom::harness_csv(&report.harness))?;
            }
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Relabel { data: path, method, out, seed, pca, gamma, noise, classes } => {
            let ds = data::load_csv(&path)?;
            let relabel = match method {
                RelabelArg::Qk => Relabel::Qk { gamma, noise },
                RelabelArg::Qrf => Relabel::Qrf,
                RelabelArg::Bands => Relabel::Bands { classes },
            };
            let cfg = ExperimentConfig {
                model: ModelKind::Qrf,
                data: DataSource::Csv { path: path.clone() },
                preprocess: Preprocess { pca, normalize: Some(true) },
                relabel,
                train_fraction: 0.5,
                hyper: Hyper::default(),
                seeds: vec![seed],
                output: None,
            };
            cfg.validate()?;
            let p = prepare(&cfg, seed, Some(&ds))?;
            // Undo the split so rows keep their input order.
            let mut rows: Vec<(usize, usize)> = p.split.train.iter().copied().zip(0..).collect();
            rows.extend(p.split.test.iter().copied().zip(p.train.len()..));
            rows.sort_unstable();
            let joined = ndarray::concatenate(ndarray::Axis(0), &[p.train.features.view(), p.test.features.view()])
                .map_err(|e| QfError::InvalidInput(e.to_string()))?;
            let labels: Vec<usize> = p.train.labels.iter().chain(&p.test.labels).copied().collect();
            let order: Vec<usize> = rows.iter().map(|&(_, j)| j).collect();
            let full = data::Dataset::new(
                joined.select(ndarray::Axis(0), &order),
                order.iter().map(|&j| labels[j]).collect(),
                p.train.meta.clone(),
            )?;
            let note = format!("relabelled {} with {method:?}, seed {seed}", path.display());
            data::write_csv(&full, &out, Some(&note))?;
            println!("wrote {} rows to {}", full.len(), out.display());
            Ok(0)
        }
        Command::GenDlp { p, g, q, n, s0, s1, seed, out } => {
            let key = RngKey::new(seed);
            let mut rng = key.derive_str("anchors").rng();
            use rand::Rng;
            if p < 5 {
                return Err(QfError::InvalidInput(format!("p = {p} is too small")));
            }
            let s0 = s0.unwrap_or_else(|| rng.random_range(0..p - 1));
            let s1 = s1.unwrap_or_else(|| rng.random_range(0..p - 1));
            let concept = DlpConcept { p, g, q, s0, s1 };
            EmbeddingSpec::dlp(p, g, q, 2).validate()?;
            let ds = data::gen_dlp_dataset(&concept, n, key.derive_str("points"))?;
            data::write_csv(&ds, &out, Some(&ds.meta.provenance))?;
            println!("wrote {} rows to {} ({})", ds.len(), out.display(), ds.meta.provenance);
            Ok(0)
        }
    }
}
