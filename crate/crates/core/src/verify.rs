//! Shot-noise checks on the Nyström completion and on trained split functions.

use rayon::prelude::*;
use serde::Serialize;

use crate::data;
use crate::error::{invalid, Result};
use crate::kernel::{self, Embedding, KernelCache};
use crate::nystrom::{self, HarnessConfig, HarnessRow, Instance, NystromMap};
use crate::qsim::{EmbeddingSpec, ShotPlan};
use crate::rng::RngKey;
use crate::svm::{self, LinearModel, SvmParams};

/// Config for comparing split functions trained on exact and sampled kernels.
#[derive(Clone, Debug)]
pub struct ProxyConfig {
    pub n: usize,
    pub l: usize,
    pub probes: usize,
    pub shots: Vec<u64>,
    pub seeds: Vec<u64>,
    pub c: f64,
    pub spec: EmbeddingSpec,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        ProxyConfig {
            n: 40,
            l: 10,
            probes: 50,
            shots: vec![256, 1024, 4096],
            seeds: (0..20).collect(),
            c: 10.0,
            spec: EmbeddingSpec::iqp(4),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProxyRow {
    pub shots: u64,
    /// Median of `|f − f̃|` over all probes and seeds.
    pub median_abs_diff: f64,
    pub mean_abs_diff: f64,
    /// Per-seed median over probes, in seed order.
    pub seed_medians: Vec<f64>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Trains a split function: Nyström map on `landmarks` plus a linear SVM.
pub fn train_split_function(
    rows: ndarray::ArrayView2<f64>,
    ids: &[u32],
    landmarks: &[usize],
    y: &[f64],
    embedding: &Embedding,
    plan: ShotPlan,
    c: f64,
    cache: &KernelCache,
) -> Result<(NystromMap, LinearModel)> {
    let gram = kernel::gram_block(rows, ids, landmarks, embedding, plan, cache)?;
    let map = NystromMap::fit(&gram, rows, ids, embedding.spec().clone(), plan)?;
    let phi = nystrom::map_block(&gram, &map.transform);
    let model = svm::train_linear(phi.view(), y, &SvmParams::new(c))?;
    Ok((map, model))
}

/// `|f − f̃|` on random probes, where `f` is trained and evaluated with the
/// exact kernel and `f̃` with `M`-shot estimates on the same landmarks.
pub fn split_deviation_proxy(cfg: &ProxyConfig) -> Result<Vec<ProxyRow>> {
    if cfg.shots.is_empty() || cfg.seeds.is_empty() || cfg.probes == 0 {
        return invalid("proxy needs shot budgets, seeds and probes");
    }
    if cfg.l == 0 || cfg.l > cfg.n || cfg.n < 4 {
        return invalid(format!("proxy needs 4 <= N and 1 <= L <= N, got N={} L={}", cfg.n, cfg.l));
    }
    let embedding = Embedding::new(cfg.spec.clone())?;
    let dim = match cfg.spec {
        EmbeddingSpec::Hea { n_qubits, .. } => n_qubits,
        ref s => s.input_dim().expect("fixed-width embedding"),
    };
    let ids: Vec<u32> = (0..cfg.n as u32).collect();
    // diffs[seed][plan] = |f − f̃| per probe
    let diffs: Vec<Vec<Vec<f64>>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let key = RngKey::new(seed).derive_str("split-proxy");
            let x = nystrom::random_points(cfg.n, dim, key.derive_str("points"));
            let labels = data::relabel_qrf(x.view(), &cfg.spec, key.derive_str("labels"))?.labels;
            let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
            let probes = nystrom::random_points(cfg.probes, dim, key.derive_str("probes"));
            let landmarks = nystrom::select_landmarks(cfg.n, cfg.l, key.derive_str("landmarks"))?;
            let cache = KernelCache::new(seed);
            let decisions = |plan: ShotPlan| -> Result<Vec<f64>> {
                let (map, model) =
                    train_split_function(x.view(), &ids, &landmarks, &y, &embedding, plan, cfg.c, &cache)?;
                probes
                    .rows()
                    .into_iter()
                    .map(|p| {
                        let p = p.to_vec();
                        let z = map.features(Instance::adhoc(&p), &embedding, &cache)?;
                        model.decision(z.view())
                    })
                    .collect()
            };
            let exact = decisions(ShotPlan::Exact)?;
            cfg.shots
                .iter()
                .map(|&m| {
                    let sampled = decisions(ShotPlan::Sampled { shots: m })?;
                    Ok(exact.iter().zip(&sampled).map(|(a, b)| (a - b).abs()).collect())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(cfg
        .shots
        .iter()
        .enumerate()
        .map(|(k, &shots)| {
            let mut all: Vec<f64> = diffs.iter().flat_map(|d| d[k].iter().copied()).collect();
            let mean_abs_diff = all.iter().sum::<f64>() / all.len() as f64;
            let seed_medians = diffs.iter().map(|d| median(&mut d[k].clone())).collect();
            ProxyRow { shots, median_abs_diff: median(&mut all), mean_abs_diff, seed_medians }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub harness: Vec<HarnessRow>,
    pub proxy: Vec<ProxyRow>,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs the completion-error harness (exact and sampled) and the split
/// function proxy; each expectation becomes a [`Check`].
pub fn run_verify(harness: &HarnessConfig, proxy: &ProxyConfig) -> Result<VerifyReport> {
    let mut checks = Vec::new();

    let full = HarnessConfig { l: harness.n, shots: vec![None], ..harness.clone() };
    let full_rows = nystrom::error_harness(&full)?;
    let worst = full_rows[0].errors.iter().copied().fold(0.0, f64::max);
    checks.push(Check {
        name: "exact completion with all landmarks".into(),
        passed: worst <= 1e-8,
        detail: format!("max spectral error {worst:.3e}"),
    });

    let rows = nystrom::error_harness(harness)?;
    if let Some(exact) = rows.iter().find(|r| r.shots.is_none()) {
        let within = exact.within_bound();
        checks.push(Check {
            name: "exact-sampling error within high-probability bound".into(),
            passed: within == exact.errors.len(),
            detail: format!("{within}/{} seeds, bound {:.3}", exact.errors.len(), exact.bound),
        });
    }
    let sampled: Vec<&HarnessRow> = rows.iter().filter(|r| r.shots.is_some()).collect();
    if let (Some(lo), Some(hi)) = (sampled.iter().min_by_key(|r| r.shots), sampled.iter().max_by_key(|r| r.shots)) {
        if lo.shots != hi.shots {
            checks.push(Check {
                name: "completion error shrinks with shots".into(),
                passed: hi.mean_err < lo.mean_err,
                detail: format!(
                    "M={}: {:.4}, M={}: {:.4}",
                    lo.shots.unwrap(),
                    lo.mean_err,
                    hi.shots.unwrap(),
                    hi.mean_err
                ),
            });
        }
    }

    let mut proxy_rows = split_deviation_proxy(proxy)?;
    proxy_rows.sort_by_key(|r| r.shots);
    let decreasing = proxy_rows.windows(2).all(|w| w[1].median_abs_diff < w[0].median_abs_diff);
    checks.push(Check {
        name: "split-function deviation shrinks with shots".into(),
        passed: decreasing,
        detail: proxy_rows
            .iter()
            .map(|r| format!("M={}: {:.4}", r.shots, r.median_abs_diff))
            .collect::<Vec<_>>()
            .join(", "),
    });

    Ok(VerifyReport { harness: rows, proxy: proxy_rows, checks })
}

pub fn default_harness() -> HarnessConfig {
    HarnessConfig {
        n: 40,
        l: 10,
        shots: vec![None, Some(256), Some(1024), Some(4096)],
        spec: EmbeddingSpec::iqp(2),
        seeds: (0..20).collect(),
        delta: 0.1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn small_proxy_runs() {
        let cfg = ProxyConfig { n: 12, l: 4, probes: 5, shots: vec![64, 4096], seeds: vec![1, 2], ..Default::default() };
        let rows = split_deviation_proxy(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].seed_medians.len(), 2);
    }
}
