//! Quantum decision trees.
//!
//! Each split node measures kernel columns against a random landmark subset,
//! maps every instance through the resulting Nyström feature map and trains a
//! linear SVM on a binary relabelling of the classes present. Instances are
//! routed by the sign of the SVM decision value.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QfError, Result};
use crate::kernel::{self, Embedding, KernelCache, PINV_CUTOFF};
use crate::linalg::{self, SymMatrix};
use crate::nystrom::{self, Instance, NystromMap};
use crate::qsim::{EmbeddingSpec, ShotPlan};
use crate::rng::RngKey;
use crate::svm::{self, LinearModel, SvmParams};

/// Class counts of a labelled subset.
pub fn class_counts(labels: impl IntoIterator<Item = usize>, n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; n_classes];
    for l in labels {
        counts[l] += 1;
    }
    counts
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy(distribution: &[f64]) -> Result<f64> {
    if let Some(p) = distribution.iter().find(|p| **p < 0.0 || p.is_nan()) {
        return invalid(format!("negative probability {p}"));
    }
    Ok(-distribution.iter().filter(|&&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>())
}

fn entropy_of_counts(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let dist: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    entropy(&dist).expect("counts are nonnegative")
}

/// Information gain `H(S) − Σ |Sᵢ|/|S| H(Sᵢ)` from class counts.
pub fn info_gain(parent: &[usize], left: &[usize], right: &[usize]) -> Result<f64> {
    if parent.len() != left.len() || parent.len() != right.len() {
        return invalid("class count vectors differ in length");
    }
    if parent.iter().zip(left.iter().zip(right)).any(|(p, (l, r))| *p != l + r) {
        return invalid("children do not partition the parent");
    }
    let n: usize = parent.iter().sum();
    if n == 0 {
        return Ok(0.0);
    }
    let nl: usize = left.iter().sum();
    let nr: usize = right.iter().sum();
    let ig = entropy_of_counts(parent)
        - (nl as f64 / n as f64) * entropy_of_counts(left)
        - (nr as f64 / n as f64) * entropy_of_counts(right);
    Ok(ig.max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionStrategy {
    /// One randomly chosen class against the rest.
    Oaa,
    /// A random half of the classes against the other half.
    Es,
}

/// Node-local binarisation of the classes present.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoClassMap {
    pub negative: Vec<usize>,
    pub positive: Vec<usize>,
    pub strategy: PartitionStrategy,
}

impl PseudoClassMap {
    pub fn label(&self, class: usize) -> f64 {
        if self.positive.contains(&class) {
            1.0
        } else {
            -1.0
        }
    }
}

/// OAA puts one random class on the positive side; ES puts `⌈|C|/2⌉` random
/// classes on the negative side and the rest on the positive side.
pub fn make_pseudo_map(classes_present: &[usize], strategy: PartitionStrategy, key: RngKey) -> Result<PseudoClassMap> {
    let mut classes = classes_present.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return invalid(format!("pseudo-class map needs at least 2 classes, got {}", classes.len()));
    }
    let mut rng = key.rng();
    classes.shuffle(&mut rng);
    let split = match strategy {
        PartitionStrategy::Oaa => classes.len() - 1,
        PartitionStrategy::Es => classes.len().div_ceil(2),
    };
    let mut negative = classes[..split].to_vec();
    let mut positive = classes[split..].to_vec();
    negative.sort_unstable();
    positive.sort_unstable();
    Ok(PseudoClassMap { negative, positive, strategy })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitDiagnostics {
    pub information_gain: f64,
    /// `2/‖w‖`; absent when the SVM returned a zero weight vector.
    pub margin: Option<f64>,
    /// `|yᵀK̂⁺y|` for the node's completed kernel and pseudo-labels.
    pub model_complexity: Option<f64>,
    pub retries: usize,
    pub final_c: f64,
    pub converged: bool,
    pub rank: usize,
    pub n_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitNode {
    pub nystrom: NystromMap,
    pub model: LinearModel,
    pub pseudo: PseudoClassMap,
    pub diagnostics: SplitDiagnostics,
}

impl SplitNode {
    /// SVM decision value for `x`; positive values route right.
    pub fn decision(&self, x: Instance<'_>, cache: &KernelCache) -> Result<f64> {
        let embedding = Embedding::new(self.nystrom.spec.clone())?;
        let z = self.nystrom.features(x, &embedding, cache)?;
        self.model.decision(z.view())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafNode {
    /// Training counts the distribution was built from.
    pub counts: Vec<usize>,
    pub distribution: Vec<f64>,
    /// Set when the leaf received no instances and copies its parent.
    #[serde(default)]
    pub inherited: bool,
}

impl LeafNode {
    pub fn from_counts(counts: Vec<usize>) -> Self {
        let total: usize = counts.iter().sum();
        let distribution = counts.iter().map(|&c| c as f64 / total as f64).collect();
        LeafNode { counts, distribution, inherited: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Split { split: Box<SplitNode>, left: Box<TreeNode>, right: Box<TreeNode> },
    Leaf(LeafNode),
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 1,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Split nodes in pre-order.
    pub fn split_nodes(&self) -> Vec<&SplitNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            if let TreeNode::Split { split, left, right } = node {
                out.push(split.as_ref());
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    pub fn leaves(&self) -> Vec<&LeafNode> {
        match self {
            TreeNode::Leaf(l) => vec![l],
            TreeNode::Split { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }
}

/// Embedding and landmark count used at one depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthParams {
    pub embedding: EmbeddingSpec,
    pub landmarks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Maximum depth `d`; the root sits at depth 1.
    pub max_depth: usize,
    /// Nodes with at most this many instances become leaves.
    pub min_split: usize,
    /// Per-depth parameters; the last entry repeats for deeper nodes.
    pub schedule: Vec<DepthParams>,
    pub c: f64,
    pub c_growth: f64,
    pub max_retries: usize,
    /// Minimum information gain that accepts a split attempt.
    pub delta: f64,
    pub plan: ShotPlan,
    pub strategy: PartitionStrategy,
    pub svm_tol: f64,
    pub svm_max_passes: usize,
}

impl TrainConfig {
    pub fn new(max_depth: usize, embedding: EmbeddingSpec, landmarks: usize, c: f64, plan: ShotPlan) -> Self {
        TrainConfig {
            max_depth,
            min_split: 1,
            schedule: vec![DepthParams { embedding, landmarks }],
            c,
            c_growth: 10.0,
            max_retries: 5,
            delta: 0.0,
            plan,
            strategy: PartitionStrategy::Es,
            svm_tol: 1e-6,
            svm_max_passes: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return invalid("max depth must be at least 1");
        }
        if self.min_split < 1 {
            return invalid("min split size must be at least 1");
        }
        if self.schedule.is_empty() {
            return invalid("per-depth schedule is empty");
        }
        for p in &self.schedule {
            if p.landmarks < 1 {
                return invalid("landmark count must be at least 1");
            }
            p.embedding.validate()?;
        }
        if !(self.c > 0.0) {
            return invalid(format!("C must be positive, got {}", self.c));
        }
        if !(self.c_growth > 1.0) {
            return invalid(format!("C growth must exceed 1, got {}", self.c_growth));
        }
        self.plan.validate()
    }

    pub fn depth_params(&self, depth: usize) -> &DepthParams {
        &self.schedule[(depth - 1).min(self.schedule.len() - 1)]
    }
}

/// Labelled rows plus the instance ids used for kernel caching.
#[derive(Clone, Copy, Debug)]
pub struct TrainingSet<'a> {
    pub features: ArrayView2<'a, f64>,
    pub labels: &'a [usize],
    pub ids: &'a [u32],
    pub n_classes: usize,
}

impl<'a> TrainingSet<'a> {
    pub fn new(features: ArrayView2<'a, f64>, labels: &'a [usize], ids: &'a [u32], n_classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() || labels.len() != ids.len() {
            return invalid(format!(
                "{} rows, {} labels and {} ids",
                features.nrows(),
                labels.len(),
                ids.len()
            ));
        }
        if !features.is_standard_layout() {
            return invalid("training features must be in row-major layout");
        }
        if let Some(l) = labels.iter().find(|&&l| l >= n_classes) {
            return invalid(format!("label {l} outside 0..{n_classes}"));
        }
        Ok(TrainingSet { features, labels, ids, n_classes })
    }

    pub fn instance(&self, i: usize) -> Instance<'a> {
        let row = self.features.index_axis_move(ndarray::Axis(0), i);
        let slice: &'a [f64] = row.to_slice().expect("standard layout row");
        Instance::known(slice, self.ids[i])
    }

    fn counts(&self, subset: &[usize]) -> Vec<usize> {
        class_counts(subset.iter().map(|&i| self.labels[i]), self.n_classes)
    }
}

pub enum SplitOutcome {
    Split { node: SplitNode, minus: Vec<usize>, plus: Vec<usize> },
    /// No attempt separated the instances; the caller makes a leaf.
    Leaf,
}

struct Attempt {
    node: SplitNode,
    minus: Vec<usize>,
    plus: Vec<usize>,
}

/// `|yᵀ(ΦΦᵀ)⁺y|` computed through the small Gram `ΦᵀΦ`.
fn low_rank_complexity(phi: &Array2<f64>, y: &[f64]) -> Result<f64> {
    let u = phi.t().dot(&ndarray::ArrayView1::from(y));
    let a = SymMatrix::symmetrized(phi.t().dot(phi).view())?;
    let v = linalg::pinv(&a, PINV_CUTOFF).as_array().dot(&u);
    Ok(v.dot(&v))
}

/// Trains one split node on the instances `subset` of `set`.
///
/// Attempts are retried with fresh landmarks, a fresh pseudo-class partition
/// and `C` multiplied by `c_growth` until the information gain exceeds
/// `delta` or `max_retries` retries are spent; the best attempt is kept.
pub fn train_split_node(
    set: &TrainingSet<'_>,
    subset: &[usize],
    params: &DepthParams,
    config: &TrainConfig,
    cache: &KernelCache,
    key: RngKey,
) -> Result<SplitOutcome> {
    let counts = set.counts(subset);
    let present: Vec<usize> = (0..set.n_classes).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 {
        return invalid("split node needs at least two classes");
    }
    let rows = linalg::select_rows(set.features, subset);
    let ids: Vec<u32> = subset.iter().map(|&i| set.ids[i]).collect();
    let embedding = Embedding::new(params.embedding.clone())?;
    let n_landmarks = params.landmarks.min(subset.len());

    let mut best: Option<(f64, Attempt)> = None;
    let mut c = config.c;
    for attempt in 0..=config.max_retries {
        let akey = key.derive(attempt as u64);
        let pseudo = make_pseudo_map(&present, config.strategy, akey.derive_str("pseudo"))?;
        let landmarks = nystrom::select_landmarks(subset.len(), n_landmarks, akey.derive_str("landmarks"))?;
        let gram = kernel::gram_block(rows.view(), &ids, &landmarks, &embedding, config.plan, cache)?;
        let map = match NystromMap::fit(&gram, rows.view(), &ids, params.embedding.clone(), config.plan) {
            Ok(m) => m,
            Err(QfError::DegenerateMatrix(_)) => {
                c *= config.c_growth;
                continue;
            }
            Err(e) => return Err(e),
        };
        let phi = nystrom::map_block(&gram, &map.transform);
        let y: Vec<f64> = subset.iter().map(|&i| pseudo.label(set.labels[i])).collect();
        let svm_params = SvmParams { c, tol: config.svm_tol, max_passes: config.svm_max_passes };
        let model = svm::train_linear(phi.view(), &y, &svm_params)?;
        let decisions: Array1<f64> = phi.dot(&Array1::from(model.weights.clone())) + model.bias;
        let (mut minus, mut plus) = (Vec::new(), Vec::new());
        for (&i, &d) in subset.iter().zip(decisions.iter()) {
            if d > 0.0 {
                plus.push(i);
            } else {
                minus.push(i);
            }
        }
        let ig = info_gain(&counts, &set.counts(&minus), &set.counts(&plus))?;
        let diagnostics = SplitDiagnostics {
            information_gain: ig,
            margin: model.margin().ok(),
            model_complexity: low_rank_complexity(&phi, &y).ok(),
            retries: attempt,
            final_c: c,
            converged: model.converged,
            rank: map.rank,
            n_samples: subset.len(),
        };
        let candidate = Attempt { node: SplitNode { nystrom: map, model, pseudo, diagnostics }, minus, plus };
        if best.as_ref().is_none_or(|(b, _)| ig > *b) {
            best = Some((ig, candidate));
        }
        if ig > config.delta {
            break;
        }
        c *= config.c_growth;
    }
    Ok(match best {
        Some((_, a)) if !a.minus.is_empty() && !a.plus.is_empty() => {
            SplitOutcome::Split { node: a.node, minus: a.minus, plus: a.plus }
        }
        _ => SplitOutcome::Leaf,
    })
}

/// Recursively grows a tree on `subset` (all rows when `None`).
pub fn train_qdt(
    set: &TrainingSet<'_>,
    subset: Option<&[usize]>,
    config: &TrainConfig,
    cache: &KernelCache,
    key: RngKey,
) -> Result<TreeNode> {
    config.validate()?;
    let all: Vec<usize>;
    let subset = match subset {
        Some(s) => s,
        None => {
            all = (0..set.labels.len()).collect();
            &all
        }
    };
    if subset.is_empty() {
        return invalid("cannot train a tree on an empty set");
    }
    grow(set, subset, 1, 1, None, config, cache, key)
}

#[allow(clippy::too_many_arguments)]
fn grow(
    set: &TrainingSet<'_>,
    subset: &[usize],
    depth: usize,
    path: u64,
    parent: Option<&LeafNode>,
    config: &TrainConfig,
    cache: &KernelCache,
    key: RngKey,
) -> Result<TreeNode> {
    if subset.is_empty() {
        let parent = parent.expect("root subset is non-empty");
        return Ok(TreeNode::Leaf(LeafNode { inherited: true, ..parent.clone() }));
    }
    let counts = set.counts(subset);
    let classes = counts.iter().filter(|&&c| c > 0).count();
    if depth >= config.max_depth || subset.len() <= config.min_split || classes < 2 {
        return Ok(TreeNode::Leaf(LeafNode::from_counts(counts)));
    }
    let params = config.depth_params(depth);
    match train_split_node(set, subset, params, config, cache, key.derive(path))? {
        SplitOutcome::Leaf => Ok(TreeNode::Leaf(LeafNode::from_counts(counts))),
        SplitOutcome::Split { node, minus, plus } => {
            let here = LeafNode::from_counts(counts);
            let (left, right) = rayon::join(
                || grow(set, &minus, depth + 1, path * 2, Some(&here), config, cache, key),
                || grow(set, &plus, depth + 1, path * 2 + 1, Some(&here), config, cache, key),
            );
            Ok(TreeNode::Split { split: Box::new(node), left: Box::new(left?), right: Box::new(right?) })
        }
    }
}

/// One routing decision on the path of an instance.
#[derive(Clone, Debug, PartialEq)]
pub struct PathStep {
    pub decision: f64,
    pub went_right: bool,
}

/// Leaf distribution reached by `x`.
pub fn predict_qdt(root: &TreeNode, x: Instance<'_>, cache: &KernelCache) -> Result<Vec<f64>> {
    predict_with_path(root, x, cache).map(|(d, _)| d)
}

/// Leaf distribution plus the decision value seen at every split on the way.
pub fn predict_with_path(root: &TreeNode, x: Instance<'_>, cache: &KernelCache) -> Result<(Vec<f64>, Vec<PathStep>)> {
    let mut node = root;
    let mut path = Vec::new();
    loop {
        match node {
            TreeNode::Leaf(leaf) => return Ok((leaf.distribution.clone(), path)),
            TreeNode::Split { split, left, right } => {
                let decision = split.decision(x, cache)?;
                let went_right = decision > 0.0;
                path.push(PathStep { decision, went_right });
                node = if went_right { right } else { left };
            }
        }
    }
}
