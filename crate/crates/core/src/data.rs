//! Datasets, preprocessing and synthetic relabelling.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dlp::DlpGroup;
use crate::error::{invalid, QfError, Result};
use crate::kernel::{self, Embedding};
use crate::linalg::{self, SymMatrix};
use crate::qsim::EmbeddingSpec;
use crate::rng::RngKey;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub feature_names: Vec<String>,
    /// Original label value of each class index.
    pub class_names: Vec<String>,
    pub pca_components: Option<usize>,
    /// Per-feature `(min, max)` used by normalisation.
    pub ranges: Vec<(f64, f64)>,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, meta: DatasetMeta) -> Result<Self> {
        if features.nrows() != labels.len() {
            return invalid(format!("{} rows but {} labels", features.nrows(), labels.len()));
        }
        let features = if features.is_standard_layout() { features } else { features.as_standard_layout().into_owned() };
        Ok(Dataset { features, labels, meta })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.meta.class_names.len().max(self.labels.iter().max().map_or(0, |m| m + 1))
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            meta: self.meta.clone(),
        }
    }

    /// Labels as `±1` (class 1 positive); only meaningful for two classes.
    pub fn signed_labels(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect()
    }
}

fn parse_err(line: u64, message: impl Into<String>) -> QfError {
    QfError::Parse { line, message: message.into() }
}

/// Reads CSV with a header row whose last column is `label`. Lines starting
/// with `#` are skipped. Label values are mapped to class indices in sorted
/// order (numeric when every label parses as a number).
pub fn read_csv(reader: impl Read) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let line = rdr.position().line();
    if headers.len() < 2 {
        return Err(parse_err(line, "need at least one feature column and a label column"));
    }
    if &headers[headers.len() - 1] != "label" {
        return Err(parse_err(line, format!("last column must be `label`, found `{}`", &headers[headers.len() - 1])));
    }
    let d = headers.len() - 1;
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        for (j, cell) in rec.iter().take(d).enumerate() {
            if cell.is_empty() {
                return Err(parse_err(line, format!("missing value in column `{}`", &headers[j])));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("non-numeric value `{cell}` in column `{}`", &headers[j])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value in column `{}`", &headers[j])));
            }
            values.push(v);
        }
        let label = &rec[d];
        if label.is_empty() {
            return Err(parse_err(line, "missing label"));
        }
        raw_labels.push(label.to_string());
    }
    let class_names = sorted_classes(&raw_labels);
    let labels = raw_labels.iter().map(|l| class_names.iter().position(|c| c == l).unwrap()).collect();
    let features = Array2::from_shape_vec((raw_labels.len(), d), values).expect("row lengths checked");
    let meta = DatasetMeta {
        feature_names: headers.iter().take(d).map(String::from).collect(),
        class_names,
        ..Default::default()
    };
    Dataset::new(features, labels, meta)
}

fn sorted_classes(raw: &[String]) -> Vec<String> {
    let mut classes: Vec<String> = raw.to_vec();
    classes.sort();
    classes.dedup();
    if classes.iter().all(|c| c.parse::<f64>().is_ok()) {
        classes.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    classes
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    read_csv(std::fs::File::open(path)?)
}

/// Writes the dataset in the format read by [`read_csv`], optionally preceded
/// by a `#` comment line.
pub fn write_csv_to(ds: &Dataset, mut out: impl Write, comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = if ds.meta.feature_names.len() == ds.dim() {
        ds.meta.feature_names.clone()
    } else {
        (0..ds.dim()).map(|j| format!("x{j}")).collect()
    };
    header.push("label".into());
    w.write_record(&header)?;
    for (row, &label) in ds.features.rows().into_iter().zip(&ds.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        rec.push(ds.meta.class_names.get(label).cloned().unwrap_or_else(|| label.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
    write_csv_to(ds, std::io::BufWriter::new(std::fs::File::create(path)?), comment)
}

#[derive(Clone, Debug)]
pub struct Pca {
    pub projected: Array2<f64>,
    /// Principal axes as columns, `D_orig × D`.
    pub components: Array2<f64>,
    /// All covariance eigenvalues, descending.
    pub eigenvalues: Array1<f64>,
    pub mean: Array1<f64>,
}

impl Pca {
    pub fn explained_variance(&self) -> f64 {
        self.eigenvalues.iter().take(self.components.ncols()).sum()
    }
}

/// Projects mean-centred rows onto the top `d` covariance eigenvectors. Each
/// axis is signed so that its largest-magnitude entry is positive.
pub fn pca_reduce(x: ArrayView2<f64>, d: usize) -> Result<Pca> {
    let (n, dim) = x.dim();
    if d < 1 || d > dim {
        return invalid(format!("PCA target dimension {d} outside 1..={dim}"));
    }
    if n < 2 {
        return invalid("PCA needs at least two rows");
    }
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centred = &x - &mean;
    let cov = centred.t().dot(&centred) / (n as f64 - 1.0);
    let e = linalg::eigh(&SymMatrix::symmetrized(cov.view())?);
    let mut components = e.vectors.slice(ndarray::s![.., ..d]).to_owned();
    for mut col in components.columns_mut() {
        let lead = col.iter().copied().fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if lead < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    let projected = centred.dot(&components).as_standard_layout().into_owned();
    Ok(Pca { projected, components, eigenvalues: e.values, mean })
}

#[derive(Clone, Debug)]
pub struct Normalized {
    pub features: Array2<f64>,
    /// `(min, max)` of each kept feature.
    pub ranges: Vec<(f64, f64)>,
    /// Original indices of the kept features.
    pub kept: Vec<usize>,
    /// Original indices of constant features that were dropped.
    pub dropped: Vec<usize>,
}

/// Maps each feature affinely onto `[0, π]` using its min and max over all
/// rows given. Constant features are dropped and reported.
pub fn normalize_to_pi(x: ArrayView2<f64>) -> Result<Normalized> {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut ranges = Vec::new();
    for (j, col) in x.columns().into_iter().enumerate() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            kept.push(j);
            ranges.push((lo, hi));
        } else {
            dropped.push(j);
        }
    }
    if kept.is_empty() {
        return Err(QfError::DegenerateFeature("every feature is constant".into()));
    }
    let mut features = x.select(Axis(1), &kept);
    for (mut col, &(lo, hi)) in features.columns_mut().into_iter().zip(&ranges) {
        col.mapv_inplace(|v| (std::f64::consts::PI * (v - lo) / (hi - lo)).clamp(0.0, std::f64::consts::PI));
    }
    let features = features.as_standard_layout().into_owned();
    Ok(Normalized { features, ranges, kept, dropped })
}

/// `n` rows drawn round-robin from `clusters` isotropic Gaussians whose
/// centres are standard normal, before any normalisation.
pub fn gaussian_mixture(n: usize, dim: usize, clusters: usize, spread: f64, key: RngKey) -> Result<Array2<f64>> {
    if clusters == 0 || dim == 0 {
        return invalid("mixture needs at least one cluster and one dimension");
    }
    if !(spread >= 0.0) {
        return invalid(format!("cluster spread must be nonnegative, got {spread}"));
    }
    let mut rng = key.rng();
    let centres: Array2<f64> = Array2::from_shape_fn((clusters, dim), |_| rng.sample(StandardNormal));
    Ok(Array2::from_shape_fn((n, dim), |(i, j)| {
        let z: f64 = rng.sample(StandardNormal);
        centres[[i % clusters, j]] + spread * z
    }))
}

/// Maps a signed label to a class index: `+1 → 1`, `−1 → 0`.
pub fn sign_to_class(s: f64) -> usize {
    usize::from(s > 0.0)
}

#[derive(Clone, Debug)]
pub struct QkRelabel {
    pub labels: Vec<usize>,
    /// Top eigenvalue of `√K_Q K_C⁻¹ √K_Q`.
    pub eigenvalue: f64,
    /// `φ* = √K_Q q*`.
    pub phi: Array1<f64>,
}

/// Relative ridge added to the classical Gram before inversion.
pub const QK_RIDGE: f64 = 1e-8;

/// Labels that the quantum kernel fits well and the classical kernel fits
/// poorly, from the top eigenvector of `√K_Q K_C⁻¹ √K_Q`. Each label takes the
/// sign of `φ*` with probability `1 − noise`, and a uniform `±1` otherwise.
pub fn relabel_qk_gram(kq: ArrayView2<f64>, kc: ArrayView2<f64>, noise: f64, key: RngKey) -> Result<QkRelabel> {
    let n = kq.nrows();
    if kq.dim() != (n, n) || kc.dim() != (n, n) || n == 0 {
        return invalid(format!("Gram shapes {:?} and {:?}", kq.dim(), kc.dim()));
    }
    if !(0.0..=1.0).contains(&noise) {
        return invalid(format!("noise {noise} outside [0,1]"));
    }
    let sq = linalg::sqrt_psd(&SymMatrix::symmetrized(kq)?);
    let trace: f64 = kc.diag().sum();
    let ridge = QK_RIDGE * trace / n as f64;
    let kc = SymMatrix::symmetrized((&kc + &(Array2::<f64>::eye(n) * ridge)).view())?;
    let ec = linalg::eigh(&kc);
    let lmin = ec.values[n - 1];
    if !(lmin > 0.0) || lmin < 1e-14 * ec.values[0] {
        return Err(QfError::DegenerateMatrix(format!("classical Gram singular after ridge (min eigenvalue {lmin:e})")));
    }
    let kc_inv = ec.reconstruct_with(|l| Some(1.0 / l));
    let m = sq.as_array().dot(&kc_inv).dot(sq.as_array());
    let e = linalg::eigh(&SymMatrix::symmetrized(m.view())?);
    let top = e.vectors.column(0);
    let phi = sq.as_array().dot(&top);
    let mut rng = key.rng();
    let labels = phi
        .iter()
        .map(|&p| {
            let s = if rng.random::<f64>() < noise {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            } else if p >= 0.0 {
                1.0
            } else {
                -1.0
            };
            sign_to_class(s)
        })
        .collect();
    Ok(QkRelabel { labels, eigenvalue: e.values[0], phi })
}

pub fn relabel_qk(x: ArrayView2<f64>, spec: &EmbeddingSpec, gamma: f64, noise: f64, key: RngKey) -> Result<QkRelabel> {
    let kq = kernel::exact_gram(x, &Embedding::new(spec.clone())?)?;
    let kc = kernel::rbf_gram(x, x, gamma)?;
    relabel_qk_gram(kq.view(), kc.view(), noise, key)
}

#[derive(Clone, Debug)]
pub struct QrfRelabel {
    pub labels: Vec<usize>,
    pub pivots: (usize, usize),
    pub projections: Vec<f64>,
    pub quartiles: [f64; 3],
}

/// Quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Labels from quartile bands of a projection `P` (0, 1, 0, 1 across bands).
pub fn quartile_labels(p: &[f64]) -> ([f64; 3], Vec<usize>) {
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = [quantile(&sorted, 0.25), quantile(&sorted, 0.5), quantile(&sorted, 0.75)];
    let labels = p.iter().map(|&v| usize::from(!(v < q[0] || (q[1] <= v && v < q[2])))).collect();
    (q, labels)
}

/// Class `c` for values between the `c/k` and `(c+1)/k` quantiles; used to
/// build `k`-class problems from a projection.
pub fn quantile_bands(p: &[f64], k: usize) -> Vec<usize> {
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..k).map(|c| quantile(&sorted, c as f64 / k as f64)).collect();
    p.iter().map(|&v| cuts.iter().filter(|&&c| v >= c).count()).collect()
}

const QRF_PIVOT_ATTEMPTS: u64 = 5;

/// Labels from `Pᵢ = k(xᵢ, x″) − k(xᵢ, x′)` for two random pivots.
pub fn relabel_qrf(x: ArrayView2<f64>, spec: &EmbeddingSpec, key: RngKey) -> Result<QrfRelabel> {
    let n = x.nrows();
    if n < 4 {
        return invalid(format!("projection relabelling needs at least 4 rows, got {n}"));
    }
    let embedding = Embedding::new(spec.clone())?;
    let row = |i: usize| x.row(i).to_vec();
    for attempt in 0..QRF_PIVOT_ATTEMPTS {
        let pick = rand::seq::index::sample(&mut key.derive(attempt).rng(), n, 2).into_vec();
        let (a, b) = (pick[0], pick[1]);
        let (xa, xb) = (row(a), row(b));
        let projections = (0..n)
            .map(|i| {
                let xi = row(i);
                Ok(embedding.exact(&xi, &xb)? - embedding.exact(&xi, &xa)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        if projections.iter().all(|&v| v == projections[0]) {
            continue;
        }
        let (quartiles, labels) = quartile_labels(&projections);
        return Ok(QrfRelabel { labels, pivots: (a, b), projections, quartiles });
    }
    Err(QfError::DegenerateMatrix(format!(
        "projection constant for {QRF_PIVOT_ATTEMPTS} pivot draws"
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DlpConcept {
    pub p: u64,
    pub g: u64,
    pub q: u32,
    /// Interval starts in log-space, one per coordinate.
    pub s0: u64,
    pub s1: u64,
}

impl DlpConcept {
    pub fn group(&self) -> Result<DlpGroup> {
        DlpGroup::new(self.p, self.g)
    }

    /// Number of logs covered by each concept interval `[s, s + (p−3)/2]`.
    pub fn interval_len(&self) -> u64 {
        (self.p - 3) / 2 + 1
    }

    /// `+1` when exactly one coordinate's log lies in its interval, else `−1`.
    pub fn label(&self, group: &DlpGroup, x0: u64, x1: u64) -> Result<i8> {
        let len = self.interval_len();
        let a = group.log_in_interval(x0, self.s0, len)?;
        let b = group.log_in_interval(x1, self.s1, len)?;
        Ok(if a ^ b { 1 } else { -1 })
    }
}

/// `n` uniform points of `Z_p* × Z_p*` labelled by the XOR-of-intervals concept.
pub fn gen_dlp_dataset(concept: &DlpConcept, n: usize, key: RngKey) -> Result<Dataset> {
    if concept.p > 1000 {
        return invalid(format!("p = {} exceeds the brute-force limit of 1000", concept.p));
    }
    if n < 4 {
        return invalid(format!("need at least 4 points, got {n}"));
    }
    let group = concept.group()?;
    let mut rng = key.rng();
    let mut values = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x0 = rng.random_range(1..concept.p);
        let x1 = rng.random_range(1..concept.p);
        values.push(x0 as f64);
        values.push(x1 as f64);
        labels.push(sign_to_class(f64::from(concept.label(&group, x0, x1)?)));
    }
    let meta = DatasetMeta {
        feature_names: vec!["x0".into(), "x1".into()],
        class_names: vec!["-1".into(), "1".into()],
        provenance: format!(
            "dlp p={} g={} q={} s0={} s1={}",
            concept.p, concept.g, concept.q, concept.s0, concept.s1
        ),
        ..Default::default()
    };
    Dataset::new(Array2::from_shape_vec((n, 2), values).expect("shape"), labels, meta)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub stratified: bool,
}

/// Shuffled train/test split with `round(ratio·N)` training rows. Per-class
/// quotas use largest-remainder rounding; when a class has fewer than two
/// members the split is unstratified.
pub fn split_indices(labels: &[usize], ratio: f64, key: RngKey) -> Result<SplitIndices> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return invalid(format!("split ratio {ratio} outside (0,1)"));
    }
    let n = labels.len();
    let n_train = (ratio * n as f64).round() as usize;
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    by_class.retain(|c| !c.is_empty());
    let stratified = by_class.iter().all(|c| c.len() >= 2);
    let mut rng = key.rng();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    if stratified {
        let exact: Vec<f64> = by_class.iter().map(|c| ratio * c.len() as f64).collect();
        let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut order: Vec<usize> = (0..by_class.len()).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        let mut missing = n_train.saturating_sub(quota.iter().sum());
        for &c in order.iter().cycle() {
            if missing == 0 {
                break;
            }
            if quota[c] < by_class[c].len() {
                quota[c] += 1;
                missing -= 1;
            }
        }
        for (members, q) in by_class.iter_mut().zip(quota) {
            members.shuffle(&mut rng);
            train.extend_from_slice(&members[..q]);
            test.extend_from_slice(&members[q..]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        train.extend_from_slice(&all[..n_train]);
        test.extend_from_slice(&all[n_train..]);
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok(SplitIndices { train, test, stratified })
}

pub fn split(ds: &Dataset, ratio: f64, key: RngKey) -> Result<(Dataset, Dataset, SplitIndices)> {
    let idx = split_indices(&ds.labels, ratio, key)?;
    Ok((ds.subset(&idx.train), ds.subset(&idx.test), idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn csv_reads_exact_values() {
        let text = "a,b,label\n# note\n1.5,2,cat\n-3,4e1,dog\n0,0,cat\n";
        let ds = read_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.features, ndarray::array![[1.5, 2.0], [-3.0, 40.0], [0.0, 0.0]]);
        assert_eq!(ds.labels, vec![0, 1, 0]);
        assert_eq!(ds.meta.class_names, vec!["cat", "dog"]);
    }

    #[test]
    fn csv_missing_cell_names_line() {
        let text = "a,b,label\n1,2,0\n3,,1\n";
        match read_csv(text.as_bytes()) {
            Err(QfError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(read_csv("a,b,label\n1,2,0\n3,1\n".as_bytes()).is_err());
        assert!(read_csv("a,b,label\n1,NaN,0\n".as_bytes()).is_err());
        assert!(read_csv("a,b,y\n1,2,0\n".as_bytes()).is_err());
    }

    #[test]
    fn numeric_labels_sort_numerically() {
        let ds = read_csv("a,label\n1,10\n2,-1\n3,2\n".as_bytes()).unwrap();
        assert_eq!(ds.meta.class_names, vec!["-1", "2", "10"]);
        assert_eq!(ds.labels, vec![2, 0, 1]);
    }

    #[test]
    fn normalize_endpoints_and_midpoint() {
        let x = ndarray::array![[2.0, 5.0], [3.0, 5.0], [4.0, 5.0]];
        let n = normalize_to_pi(x.view()).unwrap();
        assert_eq!(n.dropped, vec![1]);
        assert_eq!(n.features.column(0).to_vec(), vec![0.0, PI / 2.0, PI]);
        assert!(normalize_to_pi(ndarray::array![[1.0], [1.0]].view()).is_err());
    }

    #[test]
    fn quartile_pattern_on_monotone_projection() {
        let p: Vec<f64> = (0..8).map(f64::from).collect();
        let (_, labels) = quartile_labels(&p);
        assert_eq!(labels, vec![0, 0, 1, 1, 0, 0, 1, 1]);
    }

    #[test]
    fn bands_split_evenly() {
        let p: Vec<f64> = (0..12).map(f64::from).collect();
        assert_eq!(quantile_bands(&p, 4), vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]);
    }

    #[test]
    fn quantile_matches_linear_interpolation() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&s, 0.25), 1.75);
        assert_eq!(quantile(&s, 0.5), 2.5);
        assert_eq!(quantile(&s, 0.75), 3.25);
    }

    #[test]
    fn split_sizes() {
        let labels: Vec<usize> = (0..300).map(|i| i % 3).collect();
        let s = split_indices(&labels, 0.6, RngKey::new(4)).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (180, 120));
        assert!(s.stratified);
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..300).collect::<Vec<_>>());
        let lone = split_indices(&[0, 0, 0, 1], 0.5, RngKey::new(1)).unwrap();
        assert!(!lone.stratified);
    }

    #[test]
    fn dlp_label_cases() {
        let c = DlpConcept { p: 23, g: 5, q: 2, s0: 0, s1: 0 };
        let g = c.group().unwrap();
        let len = c.interval_len();
        let inside = g.pow(0);
        let outside = g.pow(len);
        assert_eq!(c.label(&g, inside, inside).unwrap(), -1);
        assert_eq!(c.label(&g, inside, outside).unwrap(), 1);
        assert_eq!(c.label(&g, outside, inside).unwrap(), 1);
        assert_eq!(c.label(&g, outside, outside).unwrap(), -1);
    }
}
