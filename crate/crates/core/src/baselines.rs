//! Classical comparators and the full-Gram quantum SVM.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::forest::{self, Queries};
use crate::kernel::{self, Embedding, KernelCache};
use crate::nystrom;
use crate::qsim::{EmbeddingSpec, ShotPlan};
use crate::svm::{self, KernelModel, SvmParams};
use crate::tree::{class_counts, info_gain, LeafNode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CartNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, gain: f64, left: Box<CartNode>, right: Box<CartNode> },
    Leaf(LeafNode),
}

impl CartNode {
    pub fn depth(&self) -> usize {
        match self {
            CartNode::Leaf(_) => 1,
            CartNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn predict(&self, x: &[f64]) -> &[f64] {
        let mut node = self;
        loop {
            match node {
                CartNode::Leaf(l) => return &l.distribution,
                CartNode::Split { feature, threshold, left, right, .. } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisSplit {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Highest-gain axis-aligned split over midpoints of consecutive distinct
/// values; ties go to the lowest feature, then the lowest threshold.
pub fn best_axis_split(x: ArrayView2<f64>, labels: &[usize], n_classes: usize, subset: &[usize]) -> Option<AxisSplit> {
    let parent = class_counts(subset.iter().map(|&i| labels[i]), n_classes);
    let mut best: Option<AxisSplit> = None;
    let mut order = subset.to_vec();
    for feature in 0..x.ncols() {
        order.sort_by(|&a, &b| x[[a, feature]].total_cmp(&x[[b, feature]]));
        let mut left = vec![0; n_classes];
        for k in 0..order.len() - 1 {
            left[labels[order[k]]] += 1;
            let (v, next) = (x[[order[k], feature]], x[[order[k + 1], feature]]);
            if v == next {
                continue;
            }
            let right: Vec<usize> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
            let gain = info_gain(&parent, &left, &right).expect("consistent counts");
            if best.is_none_or(|b| gain > b.gain + 1e-12) {
                best = Some(AxisSplit { feature, threshold: 0.5 * (v + next), gain });
            }
        }
    }
    best
}

/// CART grown with information gain; leaf rules match the quantum trees.
pub fn train_cart(
    x: ArrayView2<f64>,
    labels: &[usize],
    n_classes: usize,
    subset: &[usize],
    max_depth: usize,
    min_split: usize,
) -> Result<CartNode> {
    if subset.is_empty() {
        return invalid("cannot train a tree on an empty set");
    }
    if max_depth < 1 || min_split < 1 {
        return invalid("max depth and min split size must be at least 1");
    }
    Ok(grow_cart(x, labels, n_classes, subset, 1, max_depth, min_split))
}

fn grow_cart(
    x: ArrayView2<f64>,
    labels: &[usize],
    n_classes: usize,
    subset: &[usize],
    depth: usize,
    max_depth: usize,
    min_split: usize,
) -> CartNode {
    let counts = class_counts(subset.iter().map(|&i| labels[i]), n_classes);
    let classes = counts.iter().filter(|&&c| c > 0).count();
    if depth >= max_depth || subset.len() <= min_split || classes < 2 {
        return CartNode::Leaf(LeafNode::from_counts(counts));
    }
    let Some(s) = best_axis_split(x, labels, n_classes, subset) else {
        return CartNode::Leaf(LeafNode::from_counts(counts));
    };
    let (l, r): (Vec<usize>, Vec<usize>) = subset.iter().partition(|&&i| x[[i, s.feature]] <= s.threshold);
    CartNode::Split {
        feature: s.feature,
        threshold: s.threshold,
        gain: s.gain,
        left: Box::new(grow_cart(x, labels, n_classes, &l, depth + 1, max_depth, min_split)),
        right: Box::new(grow_cart(x, labels, n_classes, &r, depth + 1, max_depth, min_split)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalForest {
    pub trees: Vec<CartNode>,
    pub n_classes: usize,
    pub bags: Vec<Vec<usize>>,
}

/// Random forest of CART trees bagged exactly like the quantum forest.
#[allow(clippy::too_many_arguments)]
pub fn train_crf(
    x: ArrayView2<f64>,
    labels: &[usize],
    n_classes: usize,
    n_trees: usize,
    partition_size: usize,
    max_depth: usize,
    min_split: usize,
    master_seed: u64,
) -> Result<ClassicalForest> {
    if labels.is_empty() {
        return invalid("cannot train a forest on an empty set");
    }
    if n_trees == 0 {
        return invalid("forest needs at least one tree");
    }
    let bags = (0..n_trees)
        .map(|t| forest::bag_indices(labels.len(), partition_size, master_seed, t))
        .collect::<Result<Vec<_>>>()?;
    let trees = bags
        .par_iter()
        .map(|bag| train_cart(x, labels, n_classes, bag, max_depth, min_split))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassicalForest { trees, n_classes, bags })
}

impl ClassicalForest {
    pub fn predict_distribution(&self, x: &[f64]) -> Vec<f64> {
        let per_tree: Vec<Vec<f64>> = self.trees.iter().map(|t| t.predict(x).to_vec()).collect();
        forest::mean_distribution(&per_tree)
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        forest::argmax(&self.predict_distribution(x))
    }

    pub fn predict_all(&self, x: ArrayView2<f64>) -> Vec<usize> {
        x.rows().into_iter().map(|r| self.predict(&r.to_vec())).collect()
    }
}

fn binary_signs(labels: &[usize]) -> Result<Vec<f64>> {
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return invalid(format!("SVM baselines are binary; got class {l}"));
    }
    Ok(labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect())
}

fn decision_to_class(d: f64) -> usize {
    usize::from(d > 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfSvm {
    pub model: KernelModel,
    pub train_x: Array2<f64>,
    pub gamma: f64,
}

/// Kernel SVM on the RBF Gram; class 1 is the positive side.
pub fn train_rbf_svm(x: ArrayView2<f64>, labels: &[usize], gamma: f64, c: f64) -> Result<RbfSvm> {
    let y = binary_signs(labels)?;
    let k = kernel::rbf_gram(x, x, gamma)?;
    let model = svm::train_kernel(k.view(), &y, &SvmParams::new(c))?;
    Ok(RbfSvm { model, train_x: x.to_owned(), gamma })
}

impl RbfSvm {
    pub fn decisions(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.model.decisions(&kernel::rbf_gram(x, self.train_x.view(), self.gamma)?)
    }

    pub fn predict_all(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        Ok(self.decisions(x)?.into_iter().map(decision_to_class).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumSvm {
    pub model: KernelModel,
    pub train_x: Array2<f64>,
    pub train_ids: Vec<u32>,
    pub spec: EmbeddingSpec,
    pub plan: ShotPlan,
}

/// Kernel SVM on the full (possibly shot-sampled) quantum Gram, estimated
/// through `cache`.
pub fn train_qsvm(
    x: ArrayView2<f64>,
    ids: &[u32],
    labels: &[usize],
    spec: &EmbeddingSpec,
    plan: ShotPlan,
    c: f64,
    cache: &KernelCache,
) -> Result<QuantumSvm> {
    let y = binary_signs(labels)?;
    let embedding = Embedding::new(spec.clone())?;
    let all: Vec<usize> = (0..x.nrows()).collect();
    let gram = kernel::gram_block(x, ids, &all, &embedding, plan, cache)?;
    let k = (&gram.entries + &gram.entries.t()) * 0.5;
    let model = svm::train_kernel(k.view(), &y, &SvmParams::new(c))?;
    Ok(QuantumSvm { model, train_x: x.to_owned(), train_ids: ids.to_vec(), spec: spec.clone(), plan })
}

impl QuantumSvm {
    pub fn decisions(&self, queries: Queries<'_>, cache: &KernelCache) -> Result<Vec<f64>> {
        let embedding = Embedding::new(self.spec.clone())?;
        (0..queries.len())
            .into_par_iter()
            .map(|i| {
                let k = nystrom::kernel_row(
                    queries.instance(i),
                    self.train_x.view(),
                    &self.train_ids,
                    &embedding,
                    self.plan,
                    cache,
                )?;
                self.model.decision(&k)
            })
            .collect()
    }

    pub fn predict_all(&self, queries: Queries<'_>, cache: &KernelCache) -> Result<Vec<usize>> {
        Ok(self.decisions(queries, cache)?.into_iter().map(decision_to_class).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cart_threshold_separable() {
        let x = array![[0.1], [0.4], [0.2], [0.9], [0.7], [0.8]];
        let y = [0, 0, 0, 1, 1, 1];
        let all: Vec<usize> = (0..6).collect();
        let t = train_cart(x.view(), &y, 2, &all, 5, 1).unwrap();
        match &t {
            CartNode::Split { feature, threshold, gain, .. } => {
                assert_eq!(*feature, 0);
                assert!((threshold - 0.55).abs() < 1e-12);
                assert!((gain - 1.0).abs() < 1e-12);
            }
            _ => panic!("expected a split"),
        }
        assert_eq!(t.depth(), 2);
        for (r, &l) in x.rows().into_iter().zip(&y) {
            assert_eq!(forest::argmax(t.predict(&r.to_vec())), l);
        }
    }

    #[test]
    fn cart_ties_prefer_lowest_feature() {
        let x = array![[0.0, 0.0], [1.0, 1.0]];
        let s = best_axis_split(x.view(), &[0, 1], 2, &[0, 1]).unwrap();
        assert_eq!(s.feature, 0);
    }

    #[test]
    fn cart_single_class_is_leaf() {
        let x = array![[0.0], [1.0]];
        let t = train_cart(x.view(), &[1, 1], 2, &[0, 1], 4, 1).unwrap();
        assert_eq!(t, CartNode::Leaf(LeafNode::from_counts(vec![0, 2])));
    }

    #[test]
    fn rbf_svm_xor_1d() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = [0, 1, 0, 1];
        let m = train_rbf_svm(x.view(), &y, 10.0, 100.0).unwrap();
        assert_eq!(m.predict_all(x.view()).unwrap(), y.to_vec());
    }
}
