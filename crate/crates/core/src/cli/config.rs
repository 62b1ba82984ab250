use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::DlpConcept;
use crate::error::{QfError, Result};
use crate::qsim::{EmbeddingSpec, ShotPlan};
use crate::tree::{DepthParams, PartitionStrategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Qrf,
    Qsvm,
    Crf,
    RbfSvm,
}

impl ModelKind {
    pub fn is_quantum(self) -> bool {
        matches!(self, ModelKind::Qrf | ModelKind::Qsvm)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: PathBuf,
    },
    /// Gaussian mixture, one draw per seed.
    Mixture {
        n: usize,
        dim: usize,
        #[serde(default = "default_clusters")]
        clusters: usize,
        #[serde(default = "default_spread")]
        spread: f64,
    },
    /// Discrete-log concept; anchors are drawn per seed when omitted.
    Dlp {
        p: u64,
        g: u64,
        q: u32,
        n: usize,
        #[serde(default)]
        s0: Option<u64>,
        #[serde(default)]
        s1: Option<u64>,
    },
}

fn default_clusters() -> usize {
    8
}

fn default_spread() -> f64 {
    0.2
}

impl DataSource {
    pub fn dlp_concept(&self, s0: u64, s1: u64) -> Option<DlpConcept> {
        match *self {
            DataSource::Dlp { p, g, q, .. } => Some(DlpConcept { p, g, q, s0, s1 }),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preprocess {
    #[serde(default)]
    pub pca: Option<usize>,
    /// Defaults to on, except for discrete-log data which is used raw.
    #[serde(default)]
    pub normalize: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Relabel {
    #[default]
    None,
    Qk {
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default = "default_noise")]
        noise: f64,
    },
    Qrf,
    /// `classes` quantile bands of the two-pivot projection.
    Bands {
        classes: usize,
    },
}

fn default_noise() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyper {
    #[serde(default = "default_trees")]
    pub trees: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_min_split")]
    pub min_split: usize,
    /// Rows per bag; all training rows when absent.
    #[serde(default)]
    pub partition_size: Option<usize>,
    #[serde(default = "default_landmarks")]
    pub landmarks: usize,
    /// IQP over every feature when absent.
    #[serde(default)]
    pub embedding: Option<EmbeddingSpec>,
    /// Per-depth overrides of `embedding` and `landmarks`.
    #[serde(default)]
    pub schedule: Option<Vec<DepthParams>>,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_c_growth")]
    pub c_growth: f64,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
    #[serde(default)]
    pub delta: f64,
    /// Shots per kernel estimate; `null` for exact values.
    #[serde(default = "default_shots")]
    pub shots: Option<u64>,
    #[serde(default = "default_strategy")]
    pub strategy: PartitionStrategy,
    /// RBF width; `1/D` when absent.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_svm_tol")]
    pub svm_tol: f64,
    #[serde(default = "default_svm_passes")]
    pub svm_max_passes: usize,
}

fn default_trees() -> usize {
    5
}
fn default_depth() -> usize {
    4
}
fn default_min_split() -> usize {
    1
}
fn default_landmarks() -> usize {
    10
}
fn default_c() -> f64 {
    10.0
}
fn default_c_growth() -> f64 {
    10.0
}
fn default_retries() -> usize {
    5
}
fn default_shots() -> Option<u64> {
    Some(2048)
}
fn default_strategy() -> PartitionStrategy {
    PartitionStrategy::Es
}
fn default_svm_tol() -> f64 {
    1e-6
}
fn default_svm_passes() -> usize {
    200
}

impl Default for Hyper {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl Hyper {
    pub fn plan(&self) -> ShotPlan {
        ShotPlan::from_shots(self.shots)
    }
}

fn default_train_fraction() -> f64 {
    0.6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub data: DataSource,
    #[serde(default)]
    pub preprocess: Preprocess,
    #[serde(default)]
    pub relabel: Relabel,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub hyper: Hyper,
    pub seeds: Vec<u64>,
    /// Output directory; the `--out` flag takes precedence.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
}

fn config_err(path: &str, message: impl Into<String>) -> QfError {
    QfError::Config { path: path.into(), message: message.into() }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn is_dlp(&self) -> bool {
        matches!(self.data, DataSource::Dlp { .. })
    }

    pub fn normalize(&self) -> bool {
        self.preprocess.normalize.unwrap_or(!self.is_dlp())
    }

    /// Checks that are not expressible in the schema itself.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(config_err("seeds", "at least one seed is required"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(config_err("train_fraction", "must lie strictly between 0 and 1"));
        }
        if self.is_dlp() && (self.preprocess.pca.is_some() || self.normalize()) {
            return Err(config_err("preprocess", "discrete-log features are used raw; disable pca and normalize"));
        }
        if self.is_dlp() && self.relabel != Relabel::None {
            return Err(config_err("relabel", "discrete-log data carries its own labels"));
        }
        if let DataSource::Mixture { n, dim, clusters, spread } = self.data {
            if n < 4 || dim < 1 || clusters < 1 || !(spread >= 0.0) {
                return Err(config_err("data.mixture", "need n >= 4, dim >= 1, clusters >= 1, spread >= 0"));
            }
        }
        if matches!(self.data, DataSource::Mixture { .. }) && self.relabel == Relabel::None {
            return Err(config_err("relabel", "mixture data has no labels of its own; choose a relabelling"));
        }
        if let Relabel::Qk { noise, gamma } = self.relabel {
            if !(0.0..=1.0).contains(&noise) {
                return Err(config_err("relabel.qk.noise", "must lie in [0, 1]"));
            }
            if gamma.is_some_and(|g| !(g > 0.0)) {
                return Err(config_err("relabel.qk.gamma", "must be positive"));
            }
        }
        if let Relabel::Bands { classes } = self.relabel {
            if classes < 2 {
                return Err(config_err("relabel.bands.classes", "need at least 2 classes"));
            }
        }
        let h = &self.hyper;
        let positive = [
            ("hyper.trees", h.trees),
            ("hyper.depth", h.depth),
            ("hyper.min_split", h.min_split),
            ("hyper.landmarks", h.landmarks),
            ("hyper.svm_max_passes", h.svm_max_passes),
        ];
        for (path, v) in positive {
            if v < 1 {
                return Err(config_err(path, "must be at least 1"));
            }
        }
        if h.partition_size == Some(0) {
            return Err(config_err("hyper.partition_size", "must be at least 1"));
        }
        if !(h.c > 0.0) {
            return Err(config_err("hyper.c", "must be positive"));
        }
        if !(h.c_growth > 1.0) {
            return Err(config_err("hyper.c_growth", "must exceed 1"));
        }
        if h.shots == Some(0) {
            return Err(config_err("hyper.shots", "must be at least 1, or null for exact kernels"));
        }
        if h.gamma.is_some_and(|g| !(g > 0.0)) {
            return Err(config_err("hyper.gamma", "must be positive"));
        }
        if !(h.svm_tol > 0.0) {
            return Err(config_err("hyper.svm_tol", "must be positive"));
        }
        if let Some(e) = &h.embedding {
            e.validate().map_err(|err| config_err("hyper.embedding", err.to_string()))?;
        }
        if let Some(s) = &h.schedule {
            if s.is_empty() {
                return Err(config_err("hyper.schedule", "must not be empty"));
            }
            for (i, p) in s.iter().enumerate() {
                p.embedding.validate().map_err(|err| config_err(&format!("hyper.schedule[{i}].embedding"), err.to_string()))?;
                if p.landmarks < 1 {
                    return Err(config_err(&format!("hyper.schedule[{i}].landmarks"), "must be at least 1"));
                }
            }
        }
        Ok(())
    }
}
