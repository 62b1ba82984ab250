//! Linear algebra, Nyström completion, the SVM dual, PCA, relabelling and
//! CSV handling checked against independent implementations.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};
use qforest::data::{self, Dataset, DatasetMeta};
use qforest::kernel::{self, Embedding, KernelCache};
use qforest::linalg::{self, SymMatrix};
use qforest::nystrom;
use qforest::qsim::{EmbeddingSpec, ShotPlan};
use qforest::rng::RngKey;
use qforest::svm::{self, SvmParams};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

mod common;
use common::dual_oracle;

fn to_na(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn max_abs_diff(a: ArrayView2<f64>, b: &DMatrix<f64>) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            m = m.max((a[[i, j]] - b[(i, j)]).abs());
        }
    }
    m
}

fn gaussian(n: usize, m: usize, key: u64) -> Array2<f64> {
    let mut rng = RngKey::new(key).rng();
    Array2::from_shape_fn((n, m), |_| StandardNormal.sample(&mut rng))
}

/// Random symmetric matrix with the given rank (PSD when `psd`).
fn random_sym(n: usize, rank: usize, psd: bool, key: u64) -> Array2<f64> {
    let b = gaussian(n, rank, key);
    let mut signs = vec![1.0; rank];
    if !psd {
        for s in signs.iter_mut().step_by(2) {
            *s = -1.0;
        }
    }
    let scaled = &b * &ndarray::Array1::from(signs);
    let a = scaled.dot(&b.t());
    (&a + &a.t()) * 0.5
}

fn sorted_desc(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = v.collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

#[test]
fn eigh_matches_nalgebra() {
    for (n, seed) in [(1, 1), (3, 2), (8, 3), (25, 4)] {
        let a = random_sym(n, n, false, seed);
        let e = linalg::eigh(&SymMatrix::new(a.clone()).unwrap());
        let oracle = SymmetricEigen::new(to_na(a.view()));
        let want = sorted_desc(oracle.eigenvalues.iter().copied());
        for (g, w) in e.values.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9 * (1.0 + w.abs()), "{g} vs {w}");
        }
        // A U = U Λ column by column, and U orthonormal.
        let u = &e.vectors;
        let av = a.dot(u);
        for k in 0..n {
            for i in 0..n {
                assert!((av[[i, k]] - e.values[k] * u[[i, k]]).abs() < 1e-8);
            }
        }
        let utu = u.t().dot(u);
        assert!(max_abs_diff(utu.view(), &DMatrix::identity(n, n)) < 1e-10);
    }
}

#[test]
fn pinv_satisfies_penrose_conditions() {
    for (n, rank, seed) in [(6, 6, 10), (9, 4, 11), (12, 1, 12)] {
        let a = random_sym(n, rank, false, seed);
        let p = linalg::pinv(&SymMatrix::new(a.clone()).unwrap(), 1e-10).into_inner();
        let na = to_na(a.view());
        let np = to_na(p.view());
        let scale = na.norm().max(1.0);
        assert!((&na * &np * &na - &na).norm() < 1e-8 * scale);
        assert!((&np * &na * &np - &np).norm() < 1e-8 * np.norm().max(1.0));
        let ap = &na * &np;
        let pa = &np * &na;
        assert!((&ap - ap.transpose()).norm() < 1e-8);
        assert!((&pa - pa.transpose()).norm() < 1e-8);
        let oracle = na.clone().pseudo_inverse(1e-9 * scale).unwrap();
        assert!(max_abs_diff(p.view(), &oracle) < 1e-6 * oracle.norm().max(1.0));
    }
}

#[test]
fn sqrt_psd_squares_back() {
    let a = random_sym(10, 7, true, 20);
    let s = linalg::sqrt_psd(&SymMatrix::new(a.clone()).unwrap()).into_inner();
    let sq = s.dot(&s);
    assert!(max_abs_diff(sq.view(), &to_na(a.view())) < 1e-9 * (1.0 + linalg::frobenius(a.view())));
}

#[test]
fn inv_sqrt_whitens_the_retained_subspace() {
    let w = random_sym(8, 5, true, 21);
    let (t, rank) = nystrom::inv_sqrt(&w, 1e-10).unwrap();
    assert_eq!(rank, 5);
    // T W T is the orthogonal projector onto range(W).
    let proj = to_na(t.dot(&w).dot(&t).view());
    assert!((&proj * &proj - &proj).norm() < 1e-8);
    assert!((proj.trace() - 5.0).abs() < 1e-8);
    let pw = &proj * to_na(w.view());
    assert!((pw - to_na(w.view())).norm() < 1e-8 * (1.0 + linalg::frobenius(w.view())));
    assert!(nystrom::inv_sqrt(&Array2::zeros((3, 3)), 1e-10).is_err());
}

#[test]
fn spectral_norm_matches_svd() {
    for (r, c, seed) in [(5, 5, 30), (12, 4, 31), (3, 9, 32)] {
        let a = gaussian(r, c, seed);
        let got = linalg::spectral_norm(a.view(), 5000, 1e-14);
        let want = to_na(a.view()).singular_values().max();
        assert!((got - want).abs() < 1e-6 * want, "{got} vs {want}");
    }
    assert_eq!(linalg::spectral_norm(Array2::<f64>::zeros((3, 3)).view(), 10, 1e-9), 0.0);
}

#[test]
fn completion_matches_dense_formula() {
    let emb = Embedding::new(EmbeddingSpec::iqp(3)).unwrap();
    let x = nystrom::random_points(20, 3, RngKey::new(40));
    let ids: Vec<u32> = (0..20).collect();
    let landmarks = nystrom::select_landmarks(20, 6, RngKey::new(41)).unwrap();
    let cache = KernelCache::new(0);
    let g = kernel::gram_block(x.view(), &ids, &landmarks, &emb, ShotPlan::Exact, &cache).unwrap();
    let completed = nystrom::complete(&g).unwrap();
    let ng = to_na(g.entries.view());
    let nw = to_na(g.w().view());
    let want = &ng * nw.clone().pseudo_inverse(1e-10).unwrap() * ng.transpose();
    assert!(max_abs_diff(completed.view(), &want) < 1e-8);
    // Landmark rows and columns are reproduced exactly.
    let exact = kernel::exact_gram(x.view(), &emb).unwrap();
    for &i in &landmarks {
        for &j in &landmarks {
            assert!((completed[[i, j]] - exact[[i, j]]).abs() < 1e-8);
        }
    }
    let err = nystrom::spectral_error(exact.view(), completed.view()).unwrap();
    let direct = to_na((&exact - &completed).view()).singular_values().max();
    assert!((err - direct).abs() < 1e-6 * (1.0 + direct));
}

fn svm_problem(n: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = RngKey::new(seed).rng();
    let x = gaussian(n, 2, seed);
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let s = x[[i, 0]] + 0.5 * x[[i, 1]] + 0.4 * rng.random_range(-1.0..1.0);
            if s >= 0.0 { 1.0 } else { -1.0 }
        })
        .collect();
    (x, y)
}

fn rbf(x: &Array2<f64>, gamma: f64) -> Array2<f64> {
    let n = x.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let d = &x.row(i) - &x.row(j);
        (-gamma * d.dot(&d)).exp()
    })
}

#[test]
fn smo_reaches_projected_gradient_optimum() {
    for (seed, c, kernel) in [(50, 1.0, "linear"), (51, 10.0, "linear"), (52, 0.1, "rbf"), (53, 5.0, "rbf")] {
        let (x, y) = svm_problem(24, seed);
        let k = if kernel == "linear" { x.dot(&x.t()) } else { rbf(&x, 0.7) };
        let sol = svm::solve_dual(k.view(), &y, &SvmParams { c, tol: 1e-9, max_passes: 2000 }).unwrap();
        assert!(sol.converged);
        let want = dual_oracle(&k, &y, c);
        assert!((sol.objective - want).abs() < 1e-6 * (1.0 + want.abs()), "{kernel} C={c}: {} vs {want}", sol.objective);
        // Reported objective equals the recomputed one.
        let n = y.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += sol.alphas[i] * sol.alphas[j] * y[i] * y[j] * k[[i, j]];
            }
        }
        let direct = sol.alphas.iter().sum::<f64>() - 0.5 * quad;
        assert!((direct - sol.objective).abs() < 1e-9 * (1.0 + direct.abs()));
    }
}

#[test]
fn smo_kkt_gap_recomputed_independently() {
    let (x, y) = svm_problem(30, 60);
    let k = rbf(&x, 1.3);
    let c = 2.0;
    let tol = 1e-7;
    let sol = svm::solve_dual(k.view(), &y, &SvmParams { c, tol, max_passes: 2000 }).unwrap();
    let n = y.len();
    let grad: Vec<f64> =
        (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * k[[i, j]] * sol.alphas[j]).sum::<f64>() - 1.0).collect();
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for i in 0..n {
        let a = sol.alphas[i];
        assert!((0.0..=c).contains(&a));
        let v = -y[i] * grad[i];
        let in_up = (y[i] > 0.0 && a < c) || (y[i] < 0.0 && a > 0.0);
        let in_low = (y[i] > 0.0 && a > 0.0) || (y[i] < 0.0 && a < c);
        if in_up {
            up = up.max(v);
        }
        if in_low {
            low = low.min(v);
        }
    }
    assert!(up - low <= tol * 1.01, "gap {}", up - low);
    let eq: f64 = sol.alphas.iter().zip(&y).map(|(a, y)| a * y).sum();
    assert!(eq.abs() < 1e-9);
    // Free support vectors sit on the margin.
    for i in 0..n {
        let a = sol.alphas[i];
        if a > 1e-8 && a < c - 1e-8 {
            let f: f64 = (0..n).map(|j| sol.alphas[j] * y[j] * k[[i, j]]).sum::<f64>() + sol.bias;
            assert!((y[i] * f - 1.0).abs() < 1e-5, "row {i}: {}", y[i] * f);
        }
    }
    // The trace never decreases.
    for w in sol.trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-12);
    }
}

#[test]
fn linear_svm_on_separable_points_finds_max_margin() {
    // Closest opposite points are (1,0) and (-1,0): margin 2.
    let x = ndarray::array![[1.0, 0.0], [2.0, 1.0], [2.0, -1.0], [-1.0, 0.0], [-2.0, 1.0], [-3.0, 0.0]];
    let y = [1.0, 1.0, 1.0, -1.0, -1.0, -1.0];
    let m = svm::train_linear(x.view(), &y, &SvmParams { c: 1e3, tol: 1e-10, max_passes: 1000 }).unwrap();
    assert!((m.margin().unwrap() - 2.0).abs() < 1e-6);
    assert!((m.weights[0] - 1.0).abs() < 1e-6 && m.weights[1].abs() < 1e-6);
    assert!(m.bias.abs() < 1e-6);
    for (row, &yi) in x.rows().into_iter().zip(&y) {
        assert!(yi * m.decision(row).unwrap() >= 1.0 - 1e-6);
    }
}

#[test]
fn pca_matches_nalgebra_covariance() {
    let mut x = gaussian(40, 5, 70);
    for mut r in x.rows_mut() {
        r[1] = 3.0 * r[0] + 0.1 * r[1];
        r[4] *= 0.01;
    }
    let pca = data::pca_reduce(x.view(), 2).unwrap();
    let nx = to_na(x.view());
    let mean = nx.row_mean();
    let centred = DMatrix::from_fn(40, 5, |i, j| nx[(i, j)] - mean[j]);
    let cov = centred.transpose() * &centred / 39.0;
    let oracle = sorted_desc(SymmetricEigen::new(cov.clone()).eigenvalues.iter().copied());
    for (g, w) in pca.eigenvalues.iter().zip(&oracle) {
        assert!((g - w).abs() < 1e-9 * (1.0 + w.abs()));
    }
    assert!((pca.explained_variance() - oracle[0] - oracle[1]).abs() < 1e-9);
    // Projected variances are the top eigenvalues and the axes are uncorrelated.
    let p = to_na(pca.projected.view());
    let pc = p.transpose() * &p / 39.0;
    assert!((pc[(0, 0)] - oracle[0]).abs() < 1e-8 * oracle[0]);
    assert!((pc[(1, 1)] - oracle[1]).abs() < 1e-8 * oracle[0]);
    assert!(pc[(0, 1)].abs() < 1e-8 * oracle[0]);
}

#[test]
fn qk_relabel_eigenvalue_is_rayleigh_maximum() {
    let x = nystrom::random_points(16, 2, RngKey::new(80));
    let kq = kernel::exact_gram(x.view(), &Embedding::new(EmbeddingSpec::iqp(2)).unwrap()).unwrap();
    let kc = rbf(&x, 0.5);
    let r = data::relabel_qk_gram(kq.view(), kc.view(), 0.0, RngKey::new(81)).unwrap();
    // Independent construction of √Kq (Kc + ridge)⁻¹ √Kq.
    let n = 16;
    let ridge = data::QK_RIDGE * kc.diag().sum() / n as f64;
    let eq = SymmetricEigen::new(to_na(kq.view()));
    let sq = &eq.eigenvectors
        * DMatrix::from_diagonal(&eq.eigenvalues.map(|l| l.max(0.0).sqrt()))
        * eq.eigenvectors.transpose();
    let kci = (to_na(kc.view()) + DMatrix::identity(n, n) * ridge).try_inverse().unwrap();
    let m = &sq * kci * &sq;
    let m = (&m + m.transpose()) * 0.5;
    let top = SymmetricEigen::new(m.clone()).eigenvalues.max();
    assert!((r.eigenvalue - top).abs() < 1e-6 * top, "{} vs {top}", r.eigenvalue);
    // No random probe beats the reported maximum.
    let mut rng = RngKey::new(82).rng();
    for _ in 0..200 {
        let v = nalgebra::DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let ray = (v.transpose() * &m * &v)[(0, 0)] / v.norm_squared();
        assert!(ray <= r.eigenvalue * (1.0 + 1e-9));
    }
    // Noise-free labels are the signs of φ*.
    for (l, p) in r.labels.iter().zip(r.phi.iter()) {
        assert_eq!(*l, usize::from(*p >= 0.0));
    }
}

#[test]
fn csv_round_trip_preserves_values_and_labels() {
    let features = gaussian(7, 3, 90) * 1e3;
    let labels = vec![0, 2, 1, 1, 0, 2, 2];
    let meta = DatasetMeta {
        feature_names: vec!["a".into(), "b".into(), "c".into()],
        class_names: vec!["cat".into(), "dog".into(), "eel".into()],
        ..Default::default()
    };
    let ds = Dataset::new(features, labels, meta).unwrap();
    let mut buf = Vec::new();
    data::write_csv_to(&ds, &mut buf, Some("note")).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("# note\na,b,c,label\n"));
    let back = data::read_csv(&buf[..]).unwrap();
    assert_eq!(back.features, ds.features);
    assert_eq!(back.labels, ds.labels);
    assert_eq!(back.meta.class_names, ds.meta.class_names);
    assert_eq!(back.meta.feature_names, ds.meta.feature_names);
}

#[test]
fn csv_numeric_labels_sort_numerically() {
    let text = "x,label\n1,10\n2,9\n3,-1\n";
    let ds = data::read_csv(text.as_bytes()).unwrap();
    assert_eq!(ds.meta.class_names, ["-1", "9", "10"]);
    assert_eq!(ds.labels, [2, 1, 0]);
    assert!(data::read_csv("x,y\n1,2\n".as_bytes()).is_err());
    assert!(data::read_csv("x,label\nfoo,1\n".as_bytes()).is_err());
    assert!(data::read_csv("x,label\n,1\n".as_bytes()).is_err());
}
