//! Kernel functions, Gram-block assembly and the shared estimation cache.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dlp::{interval_overlap, DlpGroup};
use crate::error::{invalid, QfError, Result};
use crate::linalg::{self, SymMatrix};
use crate::qsim::{self, EmbeddingSpec, ShotPlan, StateVector};
use crate::rng::{fnv1a, RngKey};

/// Relative eigenvalue cutoff for pseudo-inverses of kernel matrices.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Converts a stored feature to an element of Z_p*.
pub fn as_group_element(v: f64, p: u64) -> Result<u64> {
    if v.fract() != 0.0 || v < 1.0 || v >= p as f64 {
        return invalid(format!("feature {v} is not an element of Z_{p}*"));
    }
    Ok(v as u64)
}

/// An embedding with its validated side data (the log table for DLP).
#[derive(Clone, Debug)]
pub struct Embedding {
    spec: EmbeddingSpec,
    group: Option<Arc<DlpGroup>>,
}

impl Embedding {
    pub fn new(spec: EmbeddingSpec) -> Result<Self> {
        let group = spec.validate()?.map(Arc::new);
        Ok(Embedding { spec, group })
    }

    pub fn spec(&self) -> &EmbeddingSpec {
        &self.spec
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        match self.spec.input_dim() {
            Some(d) if d != x.len() => {
                invalid(format!("{} expects {d} features, got {}", self.spec.descriptor(), x.len()))
            }
            _ if x.is_empty() => invalid("empty feature vector"),
            _ => Ok(()),
        }
    }

    /// Circuit output for `x`, or `None` for analytically evaluated kernels.
    pub fn state(&self, x: &[f64]) -> Result<Option<StateVector>> {
        match self.spec {
            EmbeddingSpec::DlpInterval { .. } => {
                self.check_input(x)?;
                Ok(None)
            }
            _ => self.spec.embed(x).map(Some),
        }
    }

    /// Noise-free kernel value.
    pub fn exact(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        match (&self.spec, &self.group) {
            (EmbeddingSpec::DlpInterval { q, .. }, Some(group)) => dlp_kernel(x1, x2, group, *q),
            _ => {
                let a = self.spec.embed(x1)?;
                let b = self.spec.embed(x2)?;
                qsim::fidelity(&a, &b)
            }
        }
    }

    fn exact_from_states(&self, x1: &[f64], s1: Option<&StateVector>, x2: &[f64], s2: Option<&StateVector>) -> Result<f64> {
        match (s1, s2) {
            (Some(a), Some(b)) => qsim::fidelity(a, b),
            _ => self.exact(x1, x2),
        }
    }
}

/// Quantum kernel value for a pair: the fidelity of the embedded states, or a
/// shot-sampled estimate of it drawn from `key`.
pub fn quantum_kernel(x1: &[f64], x2: &[f64], embedding: &Embedding, plan: ShotPlan, key: RngKey) -> Result<f64> {
    let f = embedding.exact(x1, x2)?;
    qsim::sample_fidelity(f, plan, key)
}

/// `exp(-γ‖x1 - x2‖²)`.
pub fn rbf_kernel(x1: &[f64], x2: &[f64], gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return invalid(format!("rbf gamma must be positive, got {gamma}"));
    }
    if x1.len() != x2.len() {
        return invalid(format!("rbf kernel on vectors of length {} and {}", x1.len(), x2.len()));
    }
    let d2: f64 = x1.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-gamma * d2).exp())
}

/// Squared normalised overlap of discrete-log intervals
/// `[log x, log x + 2^q - 1]`, multiplied across coordinates.
pub fn dlp_kernel(x1: &[f64], x2: &[f64], group: &DlpGroup, q: u32) -> Result<f64> {
    if x1.len() != x2.len() || x1.is_empty() {
        return invalid(format!("dlp kernel on vectors of length {} and {}", x1.len(), x2.len()));
    }
    let len = 1u64 << q;
    let m = group.order();
    if len > m {
        return invalid(format!("interval length 2^{q} exceeds group order {m}"));
    }
    let mut k = 1.0;
    for (&a, &b) in x1.iter().zip(x2) {
        let la = group.log(as_group_element(a, group.p())?)?;
        let lb = group.log(as_group_element(b, group.p())?)?;
        let frac = interval_overlap(la, lb, len, m) as f64 / len as f64;
        k *= frac * frac;
    }
    Ok(k)
}

/// Identifies one kernel function for caching: embedding plus shot plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelId {
    pub embedding: u64,
    pub plan: ShotPlan,
}

impl KernelId {
    pub fn new(spec: &EmbeddingSpec, plan: ShotPlan) -> Self {
        KernelId { embedding: spec.id(), plan }
    }

    fn key(&self) -> u64 {
        self.embedding ^ fnv1a(self.plan.descriptor().as_bytes()).rotate_left(17)
    }
}

type PairKey = (u64, u32, u32);

/// Write-once store of kernel estimates keyed by kernel and unordered
/// instance pair, shared by every tree of a run.
#[derive(Debug)]
pub struct KernelCache {
    base: RngKey,
    entries: RwLock<HashMap<PairKey, f64>>,
    total_requests: AtomicU64,
}

impl KernelCache {
    pub fn new(seed: u64) -> Self {
        KernelCache {
            base: RngKey::new(seed).derive_str("kernel-cache"),
            entries: RwLock::new(HashMap::new()),
            total_requests: AtomicU64::new(0),
        }
    }

    /// Shot-noise stream for an unordered pair of known instances.
    pub fn pair_stream(&self, kid: KernelId, a: u32, b: u32) -> RngKey {
        let (lo, hi) = (a.min(b), a.max(b));
        self.base.derive(kid.key()).derive((u64::from(lo) << 32) | u64::from(hi))
    }

    /// Shot-noise stream for an instance without an id, keyed by its features.
    pub fn adhoc_stream(&self, kid: KernelId, landmark: u32, x: &[f64]) -> RngKey {
        let bytes: Vec<u8> = x.iter().flat_map(|v| v.to_bits().to_le_bytes()).collect();
        self.base.derive(kid.key()).derive_str("adhoc").derive(u64::from(landmark)).derive(fnv1a(&bytes))
    }

    /// Returns the stored value for the pair, estimating and storing it with
    /// `estimate` on a miss.
    pub fn get_or_insert_with(
        &self,
        kid: KernelId,
        a: u32,
        b: u32,
        estimate: impl FnOnce(RngKey) -> Result<f64>,
    ) -> Result<f64> {
        self.total_requests.fetch_add(1, Ordering::Relaxed);
        let key = (kid.key(), a.min(b), a.max(b));
        if let Some(v) = self.entries.read().expect("cache lock poisoned").get(&key) {
            return Ok(*v);
        }
        let value = estimate(self.pair_stream(kid, a, b))?;
        let mut map = self.entries.write().expect("cache lock poisoned");
        let stored = *map.entry(key).or_insert(value);
        assert_eq!(stored.to_bits(), value.to_bits(), "kernel cache entry rewritten with a different value");
        Ok(stored)
    }

    pub fn unique_estimations(&self) -> u64 {
        self.entries.read().expect("cache lock poisoned").len() as u64
    }

    pub fn unique_estimations_for(&self, kid: KernelId) -> u64 {
        let k = kid.key();
        self.entries.read().expect("cache lock poisoned").keys().filter(|e| e.0 == k).count() as u64
    }

    pub fn total_requests(&self) -> u64 {
        self.total_requests.load(Ordering::Relaxed)
    }

    /// Snapshot of the stored unordered pairs (kernel key, low id, high id).
    pub fn keys(&self) -> Vec<PairKey> {
        let mut keys: Vec<_> = self.entries.read().expect("cache lock poisoned").keys().copied().collect();
        keys.sort_unstable();
        keys
    }
}

/// Measured kernel columns `G = [W, B]ᵀ`: one row per instance, one column per
/// landmark. Rows keep the caller's order; [`GramBlock::w`] gathers the
/// landmark rows.
#[derive(Clone, Debug, PartialEq)]
pub struct GramBlock {
    pub entries: Array2<f64>,
    pub landmark_indices: Vec<usize>,
}

impl GramBlock {
    pub fn n_rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_landmarks(&self) -> usize {
        self.landmark_indices.len()
    }

    /// The landmark-by-landmark block `W`.
    pub fn w(&self) -> Array2<f64> {
        linalg::select_rows(self.entries.view(), &self.landmark_indices)
    }
}

/// Fills the N×L kernel block between `rows` and the rows at
/// `landmark_indices`, consulting `cache` before estimating any pair.
///
/// `ids[i]` is the instance id of row `i`. Pairs of identical instances are
/// set to 1 without spending an estimate.
pub fn gram_block(
    rows: ArrayView2<f64>,
    ids: &[u32],
    landmark_indices: &[usize],
    embedding: &Embedding,
    plan: ShotPlan,
    cache: &KernelCache,
) -> Result<GramBlock> {
    let n = rows.nrows();
    if ids.len() != n {
        return invalid(format!("{} ids for {n} rows", ids.len()));
    }
    if landmark_indices.is_empty() {
        return invalid("at least one landmark is required");
    }
    let mut seen = vec![false; n];
    for &l in landmark_indices {
        if l >= n {
            return invalid(format!("landmark index {l} out of range for {n} rows"));
        }
        if std::mem::replace(&mut seen[l], true) {
            return invalid(format!("duplicate landmark index {l}"));
        }
    }
    plan.validate()?;
    let rows = rows.as_standard_layout();
    let kid = KernelId::new(embedding.spec(), plan);
    let mut states: Vec<Option<StateVector>> = vec![None; n];
    let state_of = |i: usize, states: &mut Vec<Option<StateVector>>| -> Result<()> {
        if states[i].is_none() {
            states[i] = embedding.state(rows.row(i).as_slice().expect("standard layout row"))?;
        }
        Ok(())
    };
    let mut entries = Array2::zeros((n, landmark_indices.len()));
    for i in 0..n {
        let xi = rows.row(i);
        let xi = xi.as_slice().expect("standard layout row");
        for (c, &l) in landmark_indices.iter().enumerate() {
            if ids[i] == ids[l] {
                entries[[i, c]] = 1.0;
                continue;
            }
            let xl = rows.row(l);
            let xl = xl.as_slice().expect("standard layout row");
            entries[[i, c]] = cache.get_or_insert_with(kid, ids[i], ids[l], |key| {
                state_of(i, &mut states)?;
                state_of(l, &mut states)?;
                let f = embedding.exact_from_states(xi, states[i].as_ref(), xl, states[l].as_ref())?;
                qsim::sample_fidelity(f, plan, key)
            })?;
        }
    }
    Ok(GramBlock { entries, landmark_indices: landmark_indices.to_vec() })
}

/// Exact N×N Gram matrix of `rows`.
pub fn exact_gram(rows: ArrayView2<f64>, embedding: &Embedding) -> Result<Array2<f64>> {
    let n = rows.nrows();
    let rows = rows.as_standard_layout();
    let states: Vec<Option<StateVector>> = rows
        .rows()
        .into_iter()
        .map(|r| embedding.state(r.as_slice().expect("standard layout row")))
        .collect::<Result<_>>()?;
    let mut k = Array2::eye(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let xi = rows.row(i);
            let xj = rows.row(j);
            let v = embedding.exact_from_states(
                xi.as_slice().unwrap(),
                states[i].as_ref(),
                xj.as_slice().unwrap(),
                states[j].as_ref(),
            )?;
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    Ok(k)
}

/// RBF Gram matrix between two row sets.
pub fn rbf_gram(a: ArrayView2<f64>, b: ArrayView2<f64>, gamma: f64) -> Result<Array2<f64>> {
    let mut k = Array2::zeros((a.nrows(), b.nrows()));
    for (i, ra) in a.rows().into_iter().enumerate() {
        for (j, rb) in b.rows().into_iter().enumerate() {
            k[[i, j]] = rbf_kernel(ra.as_slice().unwrap(), rb.as_slice().unwrap(), gamma)?;
        }
    }
    Ok(k)
}

fn check_square_labels(k: ArrayView2<f64>, y: &[f64]) -> Result<()> {
    let (r, c) = k.dim();
    if r != c {
        return invalid(format!("kernel matrix is {r}x{c}, expected square"));
    }
    if r != y.len() {
        return invalid(format!("{} labels for a {r}x{r} kernel", y.len()));
    }
    Ok(())
}

/// `yᵀKy / (N ‖K‖_F)`.
pub fn kernel_target_alignment(k: ArrayView2<f64>, y: &[f64]) -> Result<f64> {
    check_square_labels(k, y)?;
    let fro = linalg::frobenius(k);
    if fro == 0.0 {
        return Err(QfError::UndefinedValue("kernel target alignment of a zero matrix".into()));
    }
    let n = y.len() as f64;
    let mut yky = 0.0;
    for (i, yi) in y.iter().enumerate() {
        for (j, yj) in y.iter().enumerate() {
            yky += yi * k[[i, j]] * yj;
        }
    }
    Ok(yky / (n * fro))
}

/// Model complexity `|yᵀK⁺y|`.
pub fn model_complexity(k: ArrayView2<f64>, y: &[f64]) -> Result<f64> {
    check_square_labels(k, y)?;
    let kp = linalg::pinv(&SymMatrix::symmetrized(k)?, PINV_CUTOFF);
    let yv = ndarray::ArrayView1::from(y);
    Ok(yv.dot(&kp.as_array().dot(&yv)).abs())
}
