//! C ABI over the qforest library.
//!
//! Models live behind opaque `QfModel` handles. Every fallible call returns a
//! `QfStatus`; on failure `qf_last_error_message` describes the error for the
//! calling thread. Feature matrices are row-major `n_rows × n_cols` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ndarray::ArrayView2;
use qforest::cli::{ModelFile, Preprocessor, TrainedModel};
use qforest::forest::{self, Queries};
use qforest::kernel::{self, Embedding, KernelCache};
use qforest::qsim::{EmbeddingSpec, ShotPlan};
use qforest::rng::RngKey;
use qforest::tree::{PartitionStrategy, TrainConfig, TrainingSet};
use qforest::QfError;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Degenerate = 3,
    Io = 4,
    Parse = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QfEmbeddingKind {
    /// IQP with one qubit per feature.
    Iqp = 0,
    /// Hardware-efficient ansatz; features are cycled over the rotations.
    Hea = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QfStrategy {
    /// Classes split into two halves at random.
    EvenSplit = 0,
    /// One class against the rest.
    OneAgainstAll = 1,
}

/// Forest hyperparameters; fill with `qf_forest_params_default` first.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct QfForestParams {
    pub n_trees: usize,
    /// Rows per bag; 0 uses every training row.
    pub partition_size: usize,
    pub max_depth: usize,
    pub min_split: usize,
    pub landmarks: usize,
    pub c: f64,
    /// Shots per kernel estimate; 0 for exact values.
    pub shots: u64,
    pub strategy: QfStrategy,
    pub embedding: QfEmbeddingKind,
    /// Only read for `Hea`; 0 layers means one per qubit.
    pub hea_qubits: usize,
    pub hea_layers: usize,
    pub seed: u64,
}

/// A trained model plus the kernel cache its predictions draw from.
pub struct QfModel {
    file: ModelFile,
    cache: KernelCache,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &QfError) -> QfStatus {
    match e {
        QfError::InvalidInput(_) | QfError::Config { .. } => QfStatus::InvalidInput,
        QfError::DegenerateMatrix(_)
        | QfError::UndefinedValue(_)
        | QfError::DegenerateModel(_)
        | QfError::DegenerateFeature(_) => QfStatus::Degenerate,
        QfError::Io(_) => QfStatus::Io,
        QfError::Parse { .. } | QfError::Json(_) | QfError::Csv(_) => QfStatus::Parse,
    }
}

struct Fail(QfStatus, String);

impl From<QfError> for Fail {
    fn from(e: QfError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(QfStatus::NullPointer, format!("{what} is null"))
}

fn bad(msg: impl Into<String>) -> Fail {
    Fail(QfStatus::InvalidInput, msg.into())
}

/// Runs `f`, records any error or panic and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            QfStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            QfStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or point to `n_rows * n_cols` readable doubles.
unsafe fn matrix<'a>(ptr: *const f64, n_rows: usize, n_cols: usize) -> Result<ArrayView2<'a, f64>, Fail> {
    if ptr.is_null() {
        return Err(null("features"));
    }
    if n_rows == 0 || n_cols == 0 {
        return Err(bad("feature matrix must be non-empty"));
    }
    let len = n_rows.checked_mul(n_cols).ok_or_else(|| bad("matrix size overflows"))?;
    let data = std::slice::from_raw_parts(ptr, len);
    Ok(ArrayView2::from_shape((n_rows, n_cols), data).expect("shape matches length"))
}

/// # Safety
/// `path` must be null or a valid nul-terminated string.
unsafe fn path_str<'a>(path: *const c_char) -> Result<&'a str, Fail> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path).to_str().map_err(|_| bad("path is not valid UTF-8"))
}

fn embedding_spec(kind: QfEmbeddingKind, n_cols: usize, hea_qubits: usize, hea_layers: usize) -> EmbeddingSpec {
    match kind {
        QfEmbeddingKind::Iqp => EmbeddingSpec::iqp(n_cols),
        QfEmbeddingKind::Hea => EmbeddingSpec::Hea { n_qubits: hea_qubits, layers: (hea_layers > 0).then_some(hea_layers) },
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn qf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn qf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Writes the default hyperparameters into `out`.
///
/// # Safety
/// `out` must be null or point to writable `QfForestParams`.
#[no_mangle]
pub unsafe extern "C" fn qf_forest_params_default(out: *mut QfForestParams) -> QfStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = QfForestParams {
            n_trees: 5,
            partition_size: 0,
            max_depth: 4,
            min_split: 1,
            landmarks: 10,
            c: 10.0,
            shots: 2048,
            strategy: QfStrategy::EvenSplit,
            embedding: QfEmbeddingKind::Iqp,
            hea_qubits: 4,
            hea_layers: 0,
            seed: 0,
        };
        Ok(())
    })
}

/// Trains a quantum random forest. Labels are class indices below
/// `n_classes`. On success `*out` owns a model to release with `qf_model_free`.
///
/// # Safety
/// `features` must hold `n_rows * n_cols` doubles, `labels` `n_rows` values,
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qf_forest_train(
    features: *const f64,
    n_rows: usize,
    n_cols: usize,
    labels: *const u32,
    n_classes: usize,
    params: *const QfForestParams,
    out: *mut *mut QfModel,
) -> QfStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let x = matrix(features, n_rows, n_cols)?.as_standard_layout().into_owned();
        if labels.is_null() {
            return Err(null("labels"));
        }
        let labels: Vec<usize> = std::slice::from_raw_parts(labels, n_rows).iter().map(|&l| l as usize).collect();
        let ids: Vec<u32> = (0..n_rows as u32).collect();
        let set = TrainingSet::new(x.view(), &labels, &ids, n_classes)?;
        let spec = embedding_spec(p.embedding, n_cols, p.hea_qubits, p.hea_layers);
        let plan = ShotPlan::from_shots((p.shots > 0).then_some(p.shots));
        let mut config = TrainConfig::new(p.max_depth, spec, p.landmarks, p.c, plan);
        config.min_split = p.min_split;
        config.strategy = match p.strategy {
            QfStrategy::EvenSplit => PartitionStrategy::Es,
            QfStrategy::OneAgainstAll => PartitionStrategy::Oaa,
        };
        let np = if p.partition_size == 0 { n_rows } else { p.partition_size };
        let cache = KernelCache::new(p.seed);
        let master = RngKey::new(p.seed).derive_str("model").raw();
        let forest = forest::train_forest(&set, p.n_trees, np, &config, master, &cache)?;
        let file = ModelFile {
            seed: p.seed,
            class_names: (0..n_classes).map(|c| c.to_string()).collect(),
            feature_names: (0..n_cols).map(|j| format!("x{j}")).collect(),
            preprocessor: Preprocessor { input_dim: n_cols, ..Default::default() },
            cache_seed: p.seed,
            model: TrainedModel::Qrf(forest),
        };
        *out = Box::into_raw(Box::new(QfModel { file, cache: KernelCache::new(p.seed) }));
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qf_model_free(model: *mut QfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of classes the model predicts.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qf_model_n_classes(model: *const QfModel, out: *mut usize) -> QfStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = m.file.class_names.len();
        Ok(())
    })
}

/// Number of raw input features the model expects.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qf_model_n_features(model: *const QfModel, out: *mut usize) -> QfStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = m.file.preprocessor.input_dim;
        Ok(())
    })
}

/// Predicted class index for each row.
///
/// # Safety
/// `features` must hold `n_rows * n_cols` doubles and `out_labels` must have
/// room for `n_rows` values.
#[no_mangle]
pub unsafe extern "C" fn qf_model_predict(
    model: *const QfModel,
    features: *const f64,
    n_rows: usize,
    n_cols: usize,
    out_labels: *mut u32,
) -> QfStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let x = m.file.preprocessor.apply(matrix(features, n_rows, n_cols)?)?;
        if out_labels.is_null() {
            return Err(null("out_labels"));
        }
        let pred = m.file.predict_prepared(x.view(), &m.cache)?;
        let out = std::slice::from_raw_parts_mut(out_labels, n_rows);
        for (o, p) in out.iter_mut().zip(pred) {
            *o = p as u32;
        }
        Ok(())
    })
}

/// Class distributions, row-major `n_rows × n_classes`. Forest models only.
///
/// # Safety
/// `features` must hold `n_rows * n_cols` doubles and `out` must have room for
/// `n_rows * n_classes` doubles.
#[no_mangle]
pub unsafe extern "C" fn qf_model_predict_proba(
    model: *const QfModel,
    features: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut f64,
) -> QfStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let x = m.file.preprocessor.apply(matrix(features, n_rows, n_cols)?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let k = m.file.class_names.len();
        let dists: Vec<Vec<f64>> = match &m.file.model {
            TrainedModel::Qrf(f) => {
                f.predict_all(Queries::adhoc(x.view())?, &m.cache)?.into_iter().map(|p| p.distribution).collect()
            }
            TrainedModel::Crf(f) => x.rows().into_iter().map(|r| f.predict_distribution(&r.to_vec())).collect(),
            _ => return Err(bad("class distributions are only defined for forest models")),
        };
        let out = std::slice::from_raw_parts_mut(out, n_rows * k);
        for (chunk, d) in out.chunks_mut(k).zip(dists) {
            chunk.copy_from_slice(&d);
        }
        Ok(())
    })
}

/// Writes the model as JSON to `path`.
///
/// # Safety
/// `model` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qf_model_save_json(model: *const QfModel, path: *const c_char) -> QfStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let json = serde_json::to_string(&m.file).map_err(QfError::from)?;
        std::fs::write(path_str(path)?, json).map_err(QfError::from)?;
        Ok(())
    })
}

/// Loads a model written by `qf_model_save_json` or the command-line tool.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qf_model_load_json(path: *const c_char, out: *mut *mut QfModel) -> QfStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let file = ModelFile::load(path_str(path)?)?;
        let cache = KernelCache::new(file.cache_seed);
        *out = Box::into_raw(Box::new(QfModel { file, cache }));
        Ok(())
    })
}

/// The model as a JSON string; release it with `qf_string_free`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qf_model_to_json(model: *const QfModel, out: *mut *mut c_char) -> QfStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let json = serde_json::to_string(&m.file).map_err(QfError::from)?;
        *out = CString::new(json).map_err(|_| bad("JSON contains a nul byte"))?.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Fidelity kernel `|⟨φ(x1)|φ(x2)⟩|²`, estimated from `shots` samples
/// (0 for the exact value) with noise drawn from `seed`.
///
/// # Safety
/// `x1` and `x2` must each hold `dim` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qf_kernel_evaluate(
    x1: *const f64,
    x2: *const f64,
    dim: usize,
    embedding: QfEmbeddingKind,
    hea_qubits: usize,
    hea_layers: usize,
    shots: u64,
    seed: u64,
    out: *mut f64,
) -> QfStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if x1.is_null() || x2.is_null() {
            return Err(null("input vector"));
        }
        let a = std::slice::from_raw_parts(x1, dim);
        let b = std::slice::from_raw_parts(x2, dim);
        let emb = Embedding::new(embedding_spec(embedding, dim, hea_qubits, hea_layers))?;
        let plan = ShotPlan::from_shots((shots > 0).then_some(shots));
        *out = kernel::quantum_kernel(a, b, &emb, plan, RngKey::new(seed).derive_str("ffi-kernel"))?;
        Ok(())
    })
}
