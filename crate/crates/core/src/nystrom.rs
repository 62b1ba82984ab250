//! Nyström low-rank completion of quantum kernel matrices and the explicit
//! feature map it induces.
//!
//! Only the `N×L` block of kernel values against the landmarks is ever
//! estimated. The map `x ↦ W_r^{-1/2} k_L(x)` turns those values into
//! coordinates whose inner products reproduce the completed matrix
//! `K̂ = G W⁺ Gᵀ`.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QfError, Result};
use crate::kernel::{self, Embedding, GramBlock, KernelCache, KernelId};
use crate::linalg::{self, SymMatrix};
use crate::qsim::{self, EmbeddingSpec, ShotPlan};
use crate::rng::RngKey;

/// Relative spectral cutoff for the rank truncation of `W`.
pub const RANK_CUTOFF: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 200;
pub const POWER_TOL: f64 = 1e-8;

/// A data point presented to a kernel: its features and, for training
/// instances, the id under which kernel estimates are cached.
#[derive(Clone, Copy, Debug)]
pub struct Instance<'a> {
    pub features: &'a [f64],
    pub id: Option<u32>,
}

impl<'a> Instance<'a> {
    pub fn known(features: &'a [f64], id: u32) -> Self {
        Instance { features, id: Some(id) }
    }

    pub fn adhoc(features: &'a [f64]) -> Self {
        Instance { features, id: None }
    }
}

/// `L` distinct indices drawn uniformly from `0..n_rows`.
pub fn select_landmarks(n_rows: usize, l: usize, key: RngKey) -> Result<Vec<usize>> {
    if l == 0 || l > n_rows {
        return invalid(format!("cannot select {l} landmarks from {n_rows} rows"));
    }
    Ok(rand::seq::index::sample(&mut key.rng(), n_rows, l).into_vec())
}

/// `U_r Λ_r^{-1/2} U_rᵀ` over eigenvalues above `cutoff · λ_max`, with the
/// retained rank `r`.
pub fn inv_sqrt(w: &Array2<f64>, cutoff: f64) -> Result<(Array2<f64>, usize)> {
    let e = linalg::eigh(&SymMatrix::new(w.clone())?);
    let lmax = e.values.first().copied().unwrap_or(0.0);
    if !(lmax > 0.0) {
        return Err(QfError::DegenerateMatrix("landmark block has no positive eigenvalue".into()));
    }
    let cut = cutoff * lmax;
    let rank = e.values.iter().filter(|&&l| l > cut).count();
    let t = e.reconstruct_with(|l| (l > cut).then(|| 1.0 / l.sqrt()));
    // Jacobi output is symmetric up to rounding; make it exact.
    let t = (&t + &t.t()) * 0.5;
    Ok((t, rank))
}

/// The Nyström feature map of one split node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NystromMap {
    pub landmark_ids: Vec<u32>,
    pub landmark_vectors: Array2<f64>,
    pub transform: Array2<f64>,
    pub rank: usize,
    pub spec: EmbeddingSpec,
    pub plan: ShotPlan,
}

impl NystromMap {
    /// Builds the map from a measured block. `rows`/`ids` are the rows the
    /// block was measured on.
    pub fn fit(
        gram: &GramBlock,
        rows: ArrayView2<f64>,
        ids: &[u32],
        spec: EmbeddingSpec,
        plan: ShotPlan,
    ) -> Result<Self> {
        let (transform, rank) = inv_sqrt(&gram.w(), RANK_CUTOFF)?;
        Ok(NystromMap {
            landmark_ids: gram.landmark_indices.iter().map(|&i| ids[i]).collect(),
            landmark_vectors: linalg::select_rows(rows, &gram.landmark_indices),
            transform,
            rank,
            spec,
            plan,
        })
    }

    pub fn n_landmarks(&self) -> usize {
        self.landmark_ids.len()
    }

    /// Kernel values of `x` against every landmark under this map's shot plan.
    /// Known instances go through the cache; ad-hoc ones get a fresh estimate
    /// keyed by their features.
    pub fn kernel_vector(&self, x: Instance<'_>, embedding: &Embedding, cache: &KernelCache) -> Result<Vec<f64>> {
        kernel_row(x, self.landmark_vectors.view(), &self.landmark_ids, embedding, self.plan, cache)
    }

    pub fn features(&self, x: Instance<'_>, embedding: &Embedding, cache: &KernelCache) -> Result<Array1<f64>> {
        let k = self.kernel_vector(x, embedding, cache)?;
        map_point(&k, self)
    }
}

/// Kernel values of `x` against each row of `refs` under `plan`. Known
/// instances go through the cache; ad-hoc ones get a fresh estimate keyed by
/// their features.
pub fn kernel_row(
    x: Instance<'_>,
    refs: ArrayView2<f64>,
    ref_ids: &[u32],
    embedding: &Embedding,
    plan: ShotPlan,
    cache: &KernelCache,
) -> Result<Vec<f64>> {
    embedding.check_input(x.features)?;
    let refs = refs.as_standard_layout();
    let kid = KernelId::new(embedding.spec(), plan);
    ref_ids
        .iter()
        .zip(refs.rows())
        .map(|(&rid, z)| {
            let z = z.as_slice().expect("standard layout row");
            match x.id {
                Some(id) if id == rid => Ok(1.0),
                Some(id) => cache.get_or_insert_with(kid, id, rid, |key| {
                    qsim::sample_fidelity(embedding.exact(x.features, z)?, plan, key)
                }),
                None => {
                    let f = embedding.exact(x.features, z)?;
                    qsim::sample_fidelity(f, plan, cache.adhoc_stream(kid, rid, x.features))
                }
            }
        })
        .collect()
}

/// `transform · kvec`.
pub fn map_point(kvec: &[f64], map: &NystromMap) -> Result<Array1<f64>> {
    if kvec.len() != map.n_landmarks() {
        return invalid(format!("kernel vector of length {} for {} landmarks", kvec.len(), map.n_landmarks()));
    }
    Ok(map.transform.dot(&ndarray::ArrayView1::from(kvec)))
}

/// Mapped features for every row of a block: `G · W_r^{-1/2}`.
pub fn map_block(gram: &GramBlock, transform: &Array2<f64>) -> Array2<f64> {
    gram.entries.dot(transform)
}

/// Completed matrix `K̂ = G W⁺ Gᵀ`, with `W⁺` restricted to eigenvalues above
/// the rank cutoff.
pub fn complete(gram: &GramBlock) -> Result<Array2<f64>> {
    let (t, _) = inv_sqrt(&gram.w(), RANK_CUTOFF)?;
    let phi = map_block(gram, &t);
    let k = phi.dot(&phi.t());
    Ok((&k + &k.t()) * 0.5)
}

/// `‖A − B‖₂` by power iteration.
pub fn spectral_error(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return invalid(format!("shape mismatch {:?} vs {:?}", a.dim(), b.dim()));
    }
    Ok(linalg::spectral_norm((&a - &b).view(), POWER_MAX_ITER, POWER_TOL))
}

/// `(N/√L)(1 + √(8 ln(1/δ)))`: high-probability bound on the Nyström error
/// for kernels with unit diagonal.
pub fn nystrom_error_bound(n: usize, l: usize, delta: f64) -> f64 {
    n as f64 / (l as f64).sqrt() * (1.0 + (8.0 * (1.0 / delta).ln()).sqrt())
}

/// Uniform points in `[0, π]^dim`.
pub fn random_points(n: usize, dim: usize, key: RngKey) -> Array2<f64> {
    let mut rng = key.rng();
    Array2::from_shape_fn((n, dim), |_| rng.random_range(0.0..std::f64::consts::PI))
}

#[derive(Clone, Debug)]
pub struct HarnessConfig {
    pub n: usize,
    pub l: usize,
    /// `None` is exact sampling.
    pub shots: Vec<Option<u64>>,
    pub spec: EmbeddingSpec,
    pub seeds: Vec<u64>,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarnessRow {
    pub shots: Option<u64>,
    pub l: usize,
    pub n: usize,
    pub mean_err: f64,
    pub std_err: f64,
    pub bound: f64,
    /// Per-seed errors, in seed order.
    pub errors: Vec<f64>,
}

impl HarnessRow {
    pub fn within_bound(&self) -> usize {
        self.errors.iter().filter(|&&e| e <= self.bound).count()
    }
}

/// Spectral error `‖K − K̃‖₂` between the exact kernel matrix and its
/// landmark completion under each shot budget, averaged over seeds.
pub fn error_harness(cfg: &HarnessConfig) -> Result<Vec<HarnessRow>> {
    if cfg.l == 0 || cfg.l > cfg.n {
        return invalid(format!("harness needs 1 <= L <= N, got L={} N={}", cfg.l, cfg.n));
    }
    let embedding = Embedding::new(cfg.spec.clone())?;
    let dim = match cfg.spec {
        EmbeddingSpec::Hea { n_qubits, .. } => n_qubits,
        ref s => s.input_dim().expect("fixed-width embedding"),
    };
    let ids: Vec<u32> = (0..cfg.n as u32).collect();
    // errors[seed][plan]
    let per_seed: Vec<Vec<f64>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let key = RngKey::new(seed).derive_str("nystrom-harness");
            let x = random_points(cfg.n, dim, key.derive_str("points"));
            let exact = kernel::exact_gram(x.view(), &embedding)?;
            let landmarks = select_landmarks(cfg.n, cfg.l, key.derive_str("landmarks"))?;
            let cache = KernelCache::new(seed);
            cfg.shots
                .iter()
                .map(|&shots| {
                    let plan = ShotPlan::from_shots(shots);
                    let g = kernel::gram_block(x.view(), &ids, &landmarks, &embedding, plan, &cache)?;
                    spectral_error(exact.view(), complete(&g)?.view())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let bound = nystrom_error_bound(cfg.n, cfg.l, cfg.delta);
    Ok(cfg
        .shots
        .iter()
        .enumerate()
        .map(|(p, &shots)| {
            let errors: Vec<f64> = per_seed.iter().map(|e| e[p]).collect();
            let (mean_err, std_err) = mean_std(&errors);
            HarnessRow { shots, l: cfg.l, n: cfg.n, mean_err, std_err, bound, errors }
        })
        .collect())
}

pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Harness table as CSV with columns `M,L,N,mean_err,std_err,bound`.
pub fn harness_csv(rows: &[HarnessRow]) -> String {
    let mut out = String::from("M,L,N,mean_err,std_err,bound\n");
    for r in rows {
        let m = r.shots.map_or_else(|| "exact".to_string(), |m| m.to_string());
        out.push_str(&format!("{m},{},{},{:.12e},{:.12e},{:.12e}\n", r.l, r.n, r.mean_err, r.std_err, r.bound));
    }
    out
}
