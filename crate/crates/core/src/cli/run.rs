use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, ModelKind, Relabel};
use crate::baselines::{self, ClassicalForest, QuantumSvm, RbfSvm};
use crate::data::{self, Dataset, DatasetMeta, SplitIndices};
use crate::error::{invalid, QfError, Result};
use crate::forest::{self, Forest, Queries};
use crate::kernel::{self, Embedding, KernelCache};
use crate::nystrom;
use crate::qsim::EmbeddingSpec;
use crate::rng::RngKey;
use crate::tree::{DepthParams, TrainConfig, TrainingSet, TreeNode};

/// Feature transform fitted on the full pool, replayed on new data.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub pca_mean: Option<Vec<f64>>,
    /// `D_orig × D`, row-major.
    pub pca_components: Option<Vec<Vec<f64>>>,
    /// Kept feature indices and their `(min, max)`; absent without normalisation.
    pub kept: Option<Vec<usize>>,
    pub ranges: Option<Vec<(f64, f64)>>,
    pub input_dim: usize,
}

impl Preprocessor {
    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim {
            return invalid(format!("expected {} features, got {}", self.input_dim, x.ncols()));
        }
        let mut out = x.to_owned();
        if let (Some(mean), Some(comp)) = (&self.pca_mean, &self.pca_components) {
            let d = comp.first().map_or(0, Vec::len);
            let comp = Array2::from_shape_fn((comp.len(), d), |(i, j)| comp[i][j]);
            out = (&out - &ndarray::Array1::from(mean.clone())).dot(&comp);
        }
        if let (Some(kept), Some(ranges)) = (&self.kept, &self.ranges) {
            let mut sel = out.select(Axis(1), kept);
            for (mut col, &(lo, hi)) in sel.columns_mut().into_iter().zip(ranges) {
                col.mapv_inplace(|v| (std::f64::consts::PI * (v - lo) / (hi - lo)).clamp(0.0, std::f64::consts::PI));
            }
            out = sel;
        }
        Ok(out.as_standard_layout().into_owned())
    }
}

/// Train/test data for one seed after preprocessing, relabelling and splitting.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub split: SplitIndices,
    pub preprocessor: Preprocessor,
    pub dropped_features: Vec<usize>,
    /// Embedding used by quantum models and relabelling.
    pub embedding: EmbeddingSpec,
}

fn load_raw(cfg: &ExperimentConfig, key: RngKey) -> Result<Dataset> {
    match &cfg.data {
        DataSource::Csv { path } => data::load_csv(path),
        &DataSource::Mixture { n, dim, clusters, spread } => {
            let x = data::gaussian_mixture(n, dim, clusters, spread, key.derive_str("mixture"))?;
            let meta = DatasetMeta {
                feature_names: (0..dim).map(|j| format!("x{j}")).collect(),
                class_names: vec!["0".into()],
                provenance: format!("mixture n={n} dim={dim} clusters={clusters} spread={spread}"),
                ..Default::default()
            };
            Dataset::new(x, vec![0; n], meta)
        }
        &DataSource::Dlp { p, n, s0, s1, .. } => {
            let mut rng = key.derive_str("anchors").rng();
            let s0 = s0.unwrap_or_else(|| rng.random_range(0..p - 1));
            let s1 = s1.unwrap_or_else(|| rng.random_range(0..p - 1));
            let concept = cfg.data.dlp_concept(s0, s1).expect("dlp source");
            data::gen_dlp_dataset(&concept, n, key.derive_str("points"))
        }
    }
}

fn default_embedding(cfg: &ExperimentConfig, dim: usize) -> EmbeddingSpec {
    if let Some(e) = &cfg.hyper.embedding {
        return e.clone();
    }
    match cfg.data {
        DataSource::Dlp { p, g, q, .. } => EmbeddingSpec::dlp(p, g, q, 2),
        _ => EmbeddingSpec::iqp(dim),
    }
}

/// Runs the data pipeline for one seed. `raw` overrides the configured
/// source, which lets a CSV be read once for many seeds.
pub fn prepare(cfg: &ExperimentConfig, seed: u64, raw: Option<&Dataset>) -> Result<Prepared> {
    let key = RngKey::new(seed);
    let ds = match raw {
        Some(d) => d.clone(),
        None => load_raw(cfg, key.derive_str("data"))?,
    };
    let mut pre = Preprocessor { input_dim: ds.dim(), ..Default::default() };
    let mut x = ds.features.clone();
    let mut meta = ds.meta.clone();
    if let Some(d) = cfg.preprocess.pca {
        let pca = data::pca_reduce(x.view(), d)?;
        pre.pca_mean = Some(pca.mean.to_vec());
        pre.pca_components = Some(pca.components.rows().into_iter().map(|r| r.to_vec()).collect());
        meta.pca_components = Some(d);
        meta.feature_names = (0..d).map(|j| format!("pc{j}")).collect();
        x = pca.projected;
    }
    let mut dropped_features = Vec::new();
    if cfg.normalize() {
        let norm = data::normalize_to_pi(x.view())?;
        meta.feature_names = norm.kept.iter().filter_map(|&j| meta.feature_names.get(j).cloned()).collect();
        meta.ranges = norm.ranges.clone();
        dropped_features = norm.dropped;
        pre.kept = Some(norm.kept);
        pre.ranges = Some(norm.ranges);
        x = norm.features;
    }
    let embedding = default_embedding(cfg, x.ncols());
    let rkey = key.derive_str("relabel");
    let labels = match cfg.relabel {
        Relabel::None => ds.labels.clone(),
        Relabel::Qk { gamma, noise } => {
            let gamma = gamma.unwrap_or(1.0 / x.ncols() as f64);
            meta.class_names = vec!["-1".into(), "1".into()];
            data::relabel_qk(x.view(), &embedding, gamma, noise, rkey)?.labels
        }
        Relabel::Qrf => {
            meta.class_names = vec!["0".into(), "1".into()];
            data::relabel_qrf(x.view(), &embedding, rkey)?.labels
        }
        Relabel::Bands { classes } => {
            meta.class_names = (0..classes).map(|c| c.to_string()).collect();
            let p = data::relabel_qrf(x.view(), &embedding, rkey)?.projections;
            data::quantile_bands(&p, classes)
        }
    };
    let full = Dataset::new(x, labels, meta)?;
    let (train, test, split) = data::split(&full, cfg.train_fraction, key.derive_str("split"))?;
    Ok(Prepared { train, test, split, preprocessor: pre, dropped_features, embedding })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum TrainedModel {
    Qrf(Forest),
    Qsvm(QuantumSvm),
    Crf(ClassicalForest),
    RbfSvm(RbfSvm),
}

/// Everything needed to predict on new raw rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub seed: u64,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub preprocessor: Preprocessor,
    /// Seed of the kernel cache; ad hoc estimates are reproducible from it.
    pub cache_seed: u64,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Class indices for already preprocessed rows.
    pub fn predict_prepared(&self, x: ArrayView2<f64>, cache: &KernelCache) -> Result<Vec<usize>> {
        let x = x.as_standard_layout();
        let q = Queries::adhoc(x.view())?;
        match &self.model {
            TrainedModel::Qrf(f) => Ok(f.predict_all(q, cache)?.into_iter().map(|p| p.label).collect()),
            TrainedModel::Qsvm(m) => m.predict_all(q, cache),
            TrainedModel::Crf(f) => Ok(f.predict_all(x.view())),
            TrainedModel::RbfSvm(m) => m.predict_all(x.view()),
        }
    }

    pub fn predict_raw(&self, raw: ArrayView2<f64>) -> Result<Vec<usize>> {
        let x = self.preprocessor.apply(raw)?;
        self.predict_prepared(x.view(), &KernelCache::new(self.cache_seed))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub tree: usize,
    /// Heap index: root 1, children `2p` and `2p + 1`.
    pub path: u64,
    pub depth: usize,
    pub n_samples: usize,
    pub information_gain: f64,
    pub margin: Option<f64>,
    pub model_complexity: Option<f64>,
    pub retries: usize,
    pub final_c: f64,
    pub rank: usize,
    pub converged: bool,
}

fn collect_nodes(tree: usize, node: &TreeNode, path: u64, depth: usize, out: &mut Vec<NodeReport>) {
    if let TreeNode::Split { split, left, right } = node {
        let d = &split.diagnostics;
        out.push(NodeReport {
            tree,
            path,
            depth,
            n_samples: d.n_samples,
            information_gain: d.information_gain,
            margin: d.margin,
            model_complexity: d.model_complexity,
            retries: d.retries,
            final_c: d.final_c,
            rank: d.rank,
            converged: d.converged,
        });
        collect_nodes(tree, left, 2 * path, depth + 1, out);
        collect_nodes(tree, right, 2 * path + 1, depth + 1, out);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub n_classes: usize,
    pub dim: usize,
    pub dropped_features: Vec<usize>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub unique_estimations: Option<u64>,
    pub total_requests: Option<u64>,
    /// Unique kernel estimations over `N²`.
    pub estimation_ratio: Option<f64>,
    /// Mean off-diagonal Spearman correlation of tree outputs on the test set.
    pub tree_correlation: Option<f64>,
    pub nodes: Vec<NodeReport>,
}

/// Training outcome for one seed, before it is turned into a report.
pub struct SeedRun {
    pub report: SeedReport,
    pub model: ModelFile,
    pub prepared: Prepared,
    pub cache: KernelCache,
}

fn train_config(cfg: &ExperimentConfig, embedding: &EmbeddingSpec) -> TrainConfig {
    let h = &cfg.hyper;
    let schedule = h
        .schedule
        .clone()
        .unwrap_or_else(|| vec![DepthParams { embedding: embedding.clone(), landmarks: h.landmarks }]);
    TrainConfig {
        max_depth: h.depth,
        min_split: h.min_split,
        schedule,
        c: h.c,
        c_growth: h.c_growth,
        max_retries: h.max_retries,
        delta: h.delta,
        plan: h.plan(),
        strategy: h.strategy,
        svm_tol: h.svm_tol,
        svm_max_passes: h.svm_max_passes,
    }
}

fn ids(n: usize) -> Vec<u32> {
    (0..n as u32).collect()
}

/// Prepares data, trains the configured model and scores it for one seed.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, raw: Option<&Dataset>) -> Result<SeedRun> {
    let prepared = prepare(cfg, seed, raw)?;
    let (train, test) = (&prepared.train, &prepared.test);
    if train.is_empty() || test.is_empty() {
        return invalid("split produced an empty train or test set");
    }
    let n_classes = train.n_classes().max(test.n_classes()).max(train.meta.class_names.len());
    let model_seed = RngKey::new(seed).derive_str("model").raw();
    let cache = KernelCache::new(seed);
    let train_ids = ids(train.len());
    let h = &cfg.hyper;
    let mut nodes = Vec::new();
    let mut tree_correlation = None;
    let model = match cfg.model {
        ModelKind::Qrf => {
            let set = TrainingSet::new(train.features.view(), &train.labels, &train_ids, n_classes)?;
            let np = h.partition_size.unwrap_or(train.len());
            let tc = train_config(cfg, &prepared.embedding);
            let f = forest::train_forest(&set, h.trees, np, &tc, model_seed, &cache)?;
            for (t, tree) in f.trees.iter().enumerate() {
                collect_nodes(t, tree, 1, 1, &mut nodes);
            }
            TrainedModel::Qrf(f)
        }
        ModelKind::Qsvm => TrainedModel::Qsvm(baselines::train_qsvm(
            train.features.view(),
            &train_ids,
            &train.labels,
            &prepared.embedding,
            h.plan(),
            h.c,
            &cache,
        )?),
        ModelKind::Crf => {
            let np = h.partition_size.unwrap_or(train.len());
            TrainedModel::Crf(baselines::train_crf(
                train.features.view(),
                &train.labels,
                n_classes,
                h.trees,
                np,
                h.depth,
                h.min_split,
                model_seed,
            )?)
        }
        ModelKind::RbfSvm => {
            let gamma = h.gamma.unwrap_or(1.0 / train.dim() as f64);
            TrainedModel::RbfSvm(baselines::train_rbf_svm(train.features.view(), &train.labels, gamma, h.c)?)
        }
    };
    // Counters reflect training only; scoring below adds more pairs.
    let (unique, requests) = (cache.unique_estimations(), cache.total_requests());
    let file = ModelFile {
        seed,
        class_names: train.meta.class_names.clone(),
        feature_names: train.meta.feature_names.clone(),
        preprocessor: prepared.preprocessor.clone(),
        cache_seed: seed,
        model,
    };
    let train_q = Queries::new(train.features.view(), Some(&train_ids))?;
    let train_pred = match &file.model {
        TrainedModel::Qrf(f) => f.predict_all(train_q, &cache)?.into_iter().map(|p| p.label).collect(),
        TrainedModel::Qsvm(m) => m.predict_all(train_q, &cache)?,
        _ => file.predict_prepared(train.features.view(), &cache)?,
    };
    let test_pred = file.predict_prepared(test.features.view(), &cache)?;
    if let TrainedModel::Qrf(f) = &file.model {
        if f.n_trees() > 1 {
            tree_correlation = f.tree_correlation(Queries::adhoc(test.features.view())?, &cache)?.mean_off_diagonal;
        }
    }
    let quantum = cfg.model.is_quantum();
    let report = SeedReport {
        seed,
        n_train: train.len(),
        n_test: test.len(),
        n_classes,
        dim: train.dim(),
        dropped_features: prepared.dropped_features.clone(),
        train_accuracy: forest::accuracy(&train_pred, &train.labels)?,
        test_accuracy: forest::accuracy(&test_pred, &test.labels)?,
        unique_estimations: quantum.then_some(unique),
        total_requests: quantum.then_some(requests),
        estimation_ratio: quantum.then(|| unique as f64 / (train.len() as f64).powi(2)),
        tree_correlation,
        nodes,
    };
    Ok(SeedRun { report, model: file, prepared, cache })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn stat(v: &[f64]) -> Option<Stat> {
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    Some(Stat { mean, std })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub train_accuracy: Stat,
    pub test_accuracy: Stat,
    pub estimation_ratio: Option<Stat>,
    pub tree_correlation: Option<Stat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: ModelKind,
    pub config: ExperimentConfig,
    pub runs: Vec<SeedReport>,
    pub summary: Summary,
    /// The only field that differs between identical runs.
    pub wall_time_seconds: f64,
}

pub fn summarize(runs: &[SeedReport]) -> Summary {
    let col = |f: &dyn Fn(&SeedReport) -> Option<f64>| runs.iter().filter_map(f).collect::<Vec<_>>();
    Summary {
        train_accuracy: stat(&col(&|r| Some(r.train_accuracy))).expect("at least one run"),
        test_accuracy: stat(&col(&|r| Some(r.test_accuracy))).expect("at least one run"),
        estimation_ratio: stat(&col(&|r| r.estimation_ratio)),
        tree_correlation: stat(&col(&|r| r.tree_correlation)),
    }
}

fn shared_raw(cfg: &ExperimentConfig) -> Result<Option<Dataset>> {
    match &cfg.data {
        DataSource::Csv { path } => Ok(Some(data::load_csv(path)?)),
        _ => Ok(None),
    }
}

/// Runs every configured seed in parallel; results keep seed order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(RunReport, Vec<ModelFile>)> {
    let start = std::time::Instant::now();
    let raw = shared_raw(cfg)?;
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&s| run_seed(cfg, s, raw.as_ref()).map(|r| (r.report, r.model)))
        .collect::<Result<Vec<_>>>()?;
    let (reports, models): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let report = RunReport {
        model: cfg.model,
        config: cfg.clone(),
        summary: summarize(&reports),
        runs: reports,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((report, models))
}

/// `‖K − K̃‖₂` of the depth-one Nyström completion on the training rows of
/// one seed, with landmarks drawn from `key`.
pub fn kernel_error(prepared: &Prepared, cfg: &ExperimentConfig, key: RngKey) -> Result<Option<f64>> {
    if !cfg.model.is_quantum() {
        return Ok(None);
    }
    let tc = train_config(cfg, &prepared.embedding);
    let params = tc.depth_params(1);
    let x = prepared.train.features.view();
    if params.landmarks > x.nrows() {
        return Ok(None);
    }
    let embedding = Embedding::new(params.embedding.clone())?;
    let cache = KernelCache::new(key.raw());
    let landmarks = nystrom::select_landmarks(x.nrows(), params.landmarks, key)?;
    let gram = kernel::gram_block(x, &ids(x.nrows()), &landmarks, &embedding, tc.plan, &cache)?;
    let exact = kernel::exact_gram(x, &embedding)?;
    Ok(Some(nystrom::spectral_error(exact.view(), nystrom::complete(&gram)?.view())?))
}

/// Sweepable hyperparameters, by their short names.
pub const SWEEP_PARAMS: [&str; 6] = ["L", "M", "C", "d", "T", "N_p"];

/// Returns a copy of `cfg` with one hyperparameter replaced.
pub fn with_param(cfg: &ExperimentConfig, param: &str, value: &str) -> Result<ExperimentConfig> {
    let bad = |what: &str| QfError::Config { path: format!("--param {param}"), message: format!("{what}: {value:?}") };
    let int = || value.parse::<usize>().map_err(|_| bad("expected a positive integer"));
    let mut out = cfg.clone();
    let h = &mut out.hyper;
    match param {
        "L" => {
            let l = int()?;
            h.landmarks = l;
            if let Some(s) = &mut h.schedule {
                s.iter_mut().for_each(|p| p.landmarks = l);
            }
        }
        "M" => {
            h.shots = if value == "exact" { None } else { Some(value.parse().map_err(|_| bad("expected shots or \"exact\""))?) };
        }
        "C" => h.c = value.parse().map_err(|_| bad("expected a number"))?,
        "d" => h.depth = int()?,
        "T" => h.trees = int()?,
        "N_p" => h.partition_size = Some(int()?),
        _ => return Err(bad(&format!("unknown parameter, expected one of {}", SWEEP_PARAMS.join(", ")))),
    }
    out.validate()?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    /// Seed number, or `mean` / `std` for aggregate rows.
    pub seed: String,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub estimation_ratio: Option<f64>,
    pub tree_correlation: Option<f64>,
    pub kernel_error: Option<f64>,
}

/// Runs every `(value, seed)` pair and returns per-seed rows followed by
/// mean and standard deviation rows for each value.
pub fn run_sweep(cfg: &ExperimentConfig, param: &str, values: &[String]) -> Result<Vec<SweepRow>> {
    let cfgs = values.iter().map(|v| with_param(cfg, param, v)).collect::<Result<Vec<_>>>()?;
    let raw = shared_raw(cfg)?;
    let jobs: Vec<(usize, u64)> = (0..values.len()).flat_map(|v| cfg.seeds.iter().map(move |&s| (v, s))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(v, seed)| {
            let run = run_seed(&cfgs[v], seed, raw.as_ref())?;
            let kerr = kernel_error(&run.prepared, &cfgs[v], RngKey::new(seed).derive_str("kernel-error"))?;
            let r = run.report;
            Ok(SweepRow {
                param: param.into(),
                value: values[v].clone(),
                seed: seed.to_string(),
                train_accuracy: r.train_accuracy,
                test_accuracy: r.test_accuracy,
                estimation_ratio: r.estimation_ratio,
                tree_correlation: r.tree_correlation,
                kernel_error: kerr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(rows.len() + 2 * values.len());
    for value in values {
        let group: Vec<&SweepRow> = rows.iter().filter(|r| &r.value == value).collect();
        out.extend(group.iter().map(|r| (*r).clone()));
        let col = |f: &dyn Fn(&SweepRow) -> Option<f64>| stat(&group.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
        let stats = [
            col(&|r| Some(r.train_accuracy)),
            col(&|r| Some(r.test_accuracy)),
            col(&|r| r.estimation_ratio),
            col(&|r| r.tree_correlation),
            col(&|r| r.kernel_error),
        ];
        for (name, pick) in [("mean", (|s: &Stat| s.mean) as fn(&Stat) -> f64), ("std", |s: &Stat| s.std)] {
            let get = |i: usize| stats[i].as_ref().map(pick);
            out.push(SweepRow {
                param: param.into(),
                value: value.clone(),
                seed: name.into(),
                train_accuracy: get(0).unwrap_or(f64::NAN),
                test_accuracy: get(1).unwrap_or(f64::NAN),
                estimation_ratio: get(2),
                tree_correlation: get(3),
                kernel_error: get(4),
            });
        }
    }
    Ok(out)
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(String::from_utf8(w.into_inner().map_err(|e| QfError::Io(e.into_error()))?).expect("utf-8 csv"))
}
