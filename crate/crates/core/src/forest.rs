//! Bagged ensembles of quantum decision trees.

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernel::KernelCache;
use crate::nystrom::Instance;
use crate::rng::RngKey;
use crate::tree::{self, TrainConfig, TrainingSet, TreeNode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<TreeNode>,
    pub config: TrainConfig,
    pub partition_size: usize,
    pub n_classes: usize,
    pub master_seed: u64,
    /// Training rows drawn for each tree, sorted.
    pub bags: Vec<Vec<usize>>,
}

/// Rows to predict on; `ids` lets training-pool rows reuse cached kernel values.
#[derive(Clone, Copy, Debug)]
pub struct Queries<'a> {
    features: ArrayView2<'a, f64>,
    ids: Option<&'a [u32]>,
}

impl<'a> Queries<'a> {
    pub fn new(features: ArrayView2<'a, f64>, ids: Option<&'a [u32]>) -> Result<Self> {
        if !features.is_standard_layout() {
            return invalid("query features must be in row-major layout");
        }
        if let Some(ids) = ids {
            if ids.len() != features.nrows() {
                return invalid(format!("{} ids for {} query rows", ids.len(), features.nrows()));
            }
        }
        Ok(Queries { features, ids })
    }

    pub fn adhoc(features: ArrayView2<'a, f64>) -> Result<Self> {
        Self::new(features, None)
    }

    pub fn features(&self) -> ArrayView2<'a, f64> {
        self.features
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn instance(&self, i: usize) -> Instance<'a> {
        let row = self.features.index_axis_move(ndarray::Axis(0), i);
        let slice: &'a [f64] = row.to_slice().expect("standard layout row");
        match self.ids {
            Some(ids) => Instance::known(slice, ids[i]),
            None => Instance::adhoc(slice),
        }
    }
}

/// Bag of `partition_size` distinct rows for tree `t`.
pub fn bag_indices(n: usize, partition_size: usize, master_seed: u64, t: usize) -> Result<Vec<usize>> {
    if partition_size == 0 || partition_size > n {
        return invalid(format!("partition size {partition_size} outside 1..={n}"));
    }
    let key = tree_key(master_seed, t).derive_str("bag");
    let mut idx = rand::seq::index::sample(&mut key.rng(), n, partition_size).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

fn tree_key(master_seed: u64, t: usize) -> RngKey {
    RngKey::new(master_seed).derive_str("tree").derive(t as u64)
}

/// Trains `n_trees` trees on bags drawn without replacement; trees share `cache`.
pub fn train_forest(
    set: &TrainingSet<'_>,
    n_trees: usize,
    partition_size: usize,
    config: &TrainConfig,
    master_seed: u64,
    cache: &KernelCache,
) -> Result<Forest> {
    let n = set.labels.len();
    if n == 0 {
        return invalid("cannot train a forest on an empty set");
    }
    if n_trees == 0 {
        return invalid("forest needs at least one tree");
    }
    config.validate()?;
    let bags = (0..n_trees)
        .map(|t| bag_indices(n, partition_size, master_seed, t))
        .collect::<Result<Vec<_>>>()?;
    let trees = bags
        .par_iter()
        .enumerate()
        .map(|(t, bag)| tree::train_qdt(set, Some(bag), config, cache, tree_key(master_seed, t).derive_str("grow")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest { trees, config: config.clone(), partition_size, n_classes: set.n_classes, master_seed, bags })
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(dist: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = i;
        }
    }
    best
}

/// Arithmetic mean of per-tree distributions.
pub fn mean_distribution(per_tree: &[Vec<f64>]) -> Vec<f64> {
    let n_classes = per_tree.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; n_classes];
    for d in per_tree {
        for (m, p) in mean.iter_mut().zip(d) {
            *m += p;
        }
    }
    let t = per_tree.len() as f64;
    mean.iter_mut().for_each(|m| *m /= t);
    mean
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub distribution: Vec<f64>,
    pub label: usize,
}

impl Forest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Each tree's leaf distribution for `x`.
    pub fn tree_distributions(&self, x: Instance<'_>, cache: &KernelCache) -> Result<Vec<Vec<f64>>> {
        self.trees.iter().map(|t| tree::predict_qdt(t, x, cache)).collect()
    }

    pub fn predict(&self, x: Instance<'_>, cache: &KernelCache) -> Result<Prediction> {
        let distribution = mean_distribution(&self.tree_distributions(x, cache)?);
        let label = argmax(&distribution);
        Ok(Prediction { distribution, label })
    }

    pub fn predict_all(&self, queries: Queries<'_>, cache: &KernelCache) -> Result<Vec<Prediction>> {
        (0..queries.len()).into_par_iter().map(|i| self.predict(queries.instance(i), cache)).collect()
    }

    /// Predicted labels per tree: `labels[t][i]`.
    pub fn tree_labels(&self, queries: Queries<'_>, cache: &KernelCache) -> Result<Vec<Vec<usize>>> {
        self.trees
            .par_iter()
            .map(|t| {
                (0..queries.len())
                    .map(|i| tree::predict_qdt(t, queries.instance(i), cache).map(|d| argmax(&d)))
                    .collect()
            })
            .collect()
    }

    pub fn accuracy(&self, queries: Queries<'_>, labels: &[usize], cache: &KernelCache) -> Result<f64> {
        if labels.len() != queries.len() {
            return invalid(format!("{} queries but {} labels", queries.len(), labels.len()));
        }
        let preds: Vec<usize> = self.predict_all(queries, cache)?.into_iter().map(|p| p.label).collect();
        accuracy(&preds, labels)
    }

    pub fn tree_correlation(&self, queries: Queries<'_>, cache: &KernelCache) -> Result<Correlation> {
        if self.n_trees() < 2 {
            return invalid("tree correlation needs at least two trees");
        }
        let labels = self.tree_labels(queries, cache)?;
        let seqs: Vec<Vec<f64>> = labels.iter().map(|l| l.iter().map(|&v| v as f64).collect()).collect();
        Ok(correlation_matrix(&seqs))
    }
}

/// Fraction of exact label matches.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if truth.is_empty() {
        return invalid("accuracy of an empty set");
    }
    if predicted.len() != truth.len() {
        return invalid(format!("{} predictions but {} labels", predicted.len(), truth.len()));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Ranks starting at 1; tied values share their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation; `None` when either sequence is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Correlation {
    /// `None` marks pairs involving a constant prediction sequence.
    pub matrix: Vec<Vec<Option<f64>>>,
    /// Mean over defined off-diagonal entries.
    pub mean_off_diagonal: Option<f64>,
}

pub fn correlation_matrix(seqs: &[Vec<f64>]) -> Correlation {
    let t = seqs.len();
    let mut matrix = vec![vec![None; t]; t];
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..t {
        matrix[i][i] = Some(1.0);
        for j in i + 1..t {
            let r = spearman(&seqs[i], &seqs[j]);
            matrix[i][j] = r;
            matrix[j][i] = r;
            if let Some(r) = r {
                sum += 2.0 * r;
                count += 2;
            }
        }
    }
    let mean_off_diagonal = (count > 0).then(|| sum / count as f64);
    Correlation { matrix, mean_off_diagonal }
}

/// `σ = unique estimations / N²`.
pub fn estimation_ratio(cache: &KernelCache, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    cache.unique_estimations() as f64 / (n * n) as f64
}
