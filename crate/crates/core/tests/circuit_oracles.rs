//! Embeddings, kernels and the discrete-log concept checked against
//! independent dense-matrix and enumeration oracles.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use qforest::data::{gen_dlp_dataset, DlpConcept};
use qforest::dlp::{self, DlpGroup};
use qforest::kernel::{self, Embedding, KernelCache};
use qforest::qsim::{self, EmbeddingSpec, ShotPlan};
use qforest::rng::RngKey;
use rand::Rng;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn m2(a: [[C; 2]; 2]) -> DMatrix<C> {
    DMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
}

fn pauli_z() -> DMatrix<C> {
    m2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]])
}

fn hadamard() -> DMatrix<C> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    m2([[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]])
}

/// `g` on qubit `q` of `n`; qubit `j` is bit `j` of the basis index, so the
/// leftmost Kronecker factor is qubit `n − 1`.
fn on_qubit(g: &DMatrix<C>, q: usize, n: usize) -> DMatrix<C> {
    let id = DMatrix::<C>::identity(2, 2);
    let mut m = DMatrix::<C>::identity(1, 1);
    for k in (0..n).rev() {
        m = m.kronecker(if k == q { g } else { &id });
    }
    m
}

fn cnot(control: usize, target: usize, n: usize) -> DMatrix<C> {
    let p0 = m2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]);
    let p1 = m2([[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
    let x = m2([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]);
    on_qubit(&p0, control, n) + on_qubit(&p1, control, n) * on_qubit(&x, target, n)
}

fn dim(n: usize) -> usize {
    1 << n
}

/// `exp(iθA)` for an involution `A` (`A² = I`).
fn exp_involution(a: &DMatrix<C>, theta: f64) -> DMatrix<C> {
    DMatrix::<C>::identity(a.nrows(), a.ncols()) * c(theta.cos(), 0.0) + a * c(0.0, theta.sin())
}

fn u_z(x: &[f64]) -> DMatrix<C> {
    let n = x.len();
    let z = pauli_z();
    let mut u = DMatrix::<C>::identity(dim(n), dim(n));
    for j in 0..n {
        u = exp_involution(&on_qubit(&z, j, n), x[j]) * u;
        for k in (j + 1)..n {
            let zz = on_qubit(&z, j, n) * on_qubit(&z, k, n);
            u = exp_involution(&zz, x[j] * x[k]) * u;
        }
    }
    u
}

fn h_all(n: usize) -> DMatrix<C> {
    (0..n).fold(DMatrix::identity(dim(n), dim(n)), |u, q| on_qubit(&hadamard(), q, n) * u)
}

fn ground(n: usize) -> DVector<C> {
    let mut v = DVector::from_element(dim(n), c(0.0, 0.0));
    v[0] = c(1.0, 0.0);
    v
}

fn iqp_oracle(x: &[f64]) -> DVector<C> {
    let n = x.len();
    let u = u_z(x) * h_all(n) * u_z(x) * h_all(n);
    u * ground(n)
}

/// `E_n`: CNOTs on 1-based pairs (2j−1, 2j) first, then (2j, 2j+1).
fn ladder(n: usize) -> DMatrix<C> {
    let mut u = DMatrix::<C>::identity(dim(n), dim(n));
    for j in 1..=n / 2 {
        u = cnot(2 * j - 2, 2 * j - 1, n) * u;
    }
    for j in 1..=n / 2 {
        if 2 * j + 1 <= n {
            u = cnot(2 * j - 1, 2 * j, n) * u;
        }
    }
    u
}

fn ry(t: f64) -> DMatrix<C> {
    let (s, co) = (t / 2.0).sin_cos();
    m2([[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]])
}

fn rz(t: f64) -> DMatrix<C> {
    m2([[C::from_polar(1.0, -t / 2.0), c(0.0, 0.0)], [c(0.0, 0.0), C::from_polar(1.0, t / 2.0)]])
}

fn hea_oracle(x: &[f64], n: usize, layers: usize) -> DVector<C> {
    let d = x.len();
    let mut u = DMatrix::<C>::identity(dim(n), dim(n));
    for l in 0..layers {
        for j in 0..n {
            u = on_qubit(&ry(x[(2 * n * l + j) % d]), j, n) * u;
        }
        u = ladder(n) * u;
        for j in 0..n {
            u = on_qubit(&rz(x[(2 * n * l + n + j) % d]), j, n) * u;
        }
        u = ladder(n) * u;
    }
    u * ground(n)
}

fn assert_state_eq(got: &[C], want: &DVector<C>, tol: f64) {
    assert_eq!(got.len(), want.len());
    for (i, (g, w)) in got.iter().zip(want.iter()).enumerate() {
        assert!((g - w).norm() <= tol, "amplitude {i}: {g} vs {w}");
    }
}

fn rand_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.0..PI)).collect()
}

#[test]
fn iqp_matches_dense_oracle() {
    let s = qsim::embed_iqp(&[PI, PI], 2).unwrap();
    assert_state_eq(s.amplitudes(), &iqp_oracle(&[PI, PI]), 1e-9);
    let mut rng = RngKey::new(11).rng();
    for n in 1..=3 {
        for _ in 0..20 {
            let x = rand_vec(&mut rng, n);
            let s = qsim::embed_iqp(&x, n).unwrap();
            assert_state_eq(s.amplitudes(), &iqp_oracle(&x), 1e-9);
        }
    }
}

#[test]
fn hea_matches_dense_oracle() {
    for n in 1..=3 {
        let zeros = vec![0.0; n];
        let s = qsim::embed_hea(&zeros, n, n).unwrap();
        assert_state_eq(s.amplitudes(), &hea_oracle(&zeros, n, n), 1e-9);
    }
    let mut rng = RngKey::new(12).rng();
    for n in 1..=3 {
        for layers in 1..=3 {
            for d in [1, 2, 5, 9] {
                let x = rand_vec(&mut rng, d);
                let s = qsim::embed_hea(&x, n, layers).unwrap();
                assert_state_eq(s.amplitudes(), &hea_oracle(&x, n, layers), 1e-9);
            }
        }
    }
}

#[test]
fn ladder_oracle_is_brick_wall() {
    // The oracle's E_4 maps |q0=1⟩ through CNOT(0,1) then CNOT(1,2): bits 0,1,2 set.
    let n = 4;
    let mut v = DVector::from_element(dim(n), c(0.0, 0.0));
    v[1] = c(1.0, 0.0);
    let out = ladder(n) * v;
    assert!((out[0b0111] - c(1.0, 0.0)).norm() < 1e-12);
}

#[test]
fn fidelity_matches_direct_summation() {
    let mut rng = RngKey::new(13).rng();
    let x1 = rand_vec(&mut rng, 3);
    let x2 = rand_vec(&mut rng, 3);
    let a = iqp_oracle(&x1);
    let b = iqp_oracle(&x2);
    let direct = a.iter().zip(b.iter()).map(|(u, v)| u.conj() * v).sum::<C>().norm_sqr();
    let f = qsim::fidelity(&qsim::embed_iqp(&x1, 3).unwrap(), &qsim::embed_iqp(&x2, 3).unwrap()).unwrap();
    assert!((f - direct).abs() < 1e-12);
}

#[test]
fn quantum_kernel_matches_statevector_oracle() {
    let emb = Embedding::new(EmbeddingSpec::iqp(2)).unwrap();
    let a = iqp_oracle(&[0.0, 0.0]);
    let b = iqp_oracle(&[PI, PI]);
    let want = a.dotc(&b).norm_sqr();
    let got = kernel::quantum_kernel(&[0.0, 0.0], &[PI, PI], &emb, ShotPlan::Exact, RngKey::new(0)).unwrap();
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn gram_block_matches_elementwise_kernel_calls() {
    let emb = Embedding::new(EmbeddingSpec::iqp(2)).unwrap();
    let x = qforest::nystrom::random_points(6, 2, RngKey::new(4));
    let ids: Vec<u32> = (0..6).collect();
    let landmarks = [4, 1];
    let g = kernel::gram_block(x.view(), &ids, &landmarks, &emb, ShotPlan::Exact, &KernelCache::new(0)).unwrap();
    for i in 0..6 {
        for (j, &l) in landmarks.iter().enumerate() {
            let xi = x.row(i).to_vec();
            let xl = x.row(l).to_vec();
            let want = kernel::quantum_kernel(&xi, &xl, &emb, ShotPlan::Exact, RngKey::new(0)).unwrap();
            assert!((g.entries[[i, j]] - want).abs() < 1e-12);
        }
    }
}

/// Log table built by repeated multiplication.
fn log_table(p: u64, g: u64) -> Vec<Option<u64>> {
    let mut table = vec![None; p as usize];
    let mut v = 1u64;
    for e in 0..p - 1 {
        table[v as usize] = Some(e);
        v = v * g % p;
    }
    table
}

fn is_generator(p: u64, g: u64) -> bool {
    log_table(p, g).iter().skip(1).all(Option::is_some)
}

#[test]
fn generators_verified_by_enumeration() {
    assert!(is_generator(23, 5));
    assert!(is_generator(59, 2));
    assert!(DlpGroup::new(23, 5).is_ok());
    assert!(DlpGroup::new(59, 2).is_ok());
    // 2 has order 11 mod 23.
    assert!(!is_generator(23, 2));
    assert!(DlpGroup::new(23, 2).is_err());
    assert!(DlpGroup::new(21, 2).is_err());
}

#[test]
fn group_log_matches_table() {
    for (p, g) in [(23, 5), (29, 2), (31, 3), (59, 2)] {
        let table = log_table(p, g);
        let group = DlpGroup::new(p, g).unwrap();
        for x in 1..p {
            assert_eq!(group.log(x).unwrap(), table[x as usize].unwrap());
            assert_eq!(group.pow(table[x as usize].unwrap()), x);
        }
    }
}

/// Explicit uniform superposition over `{x·g^j : j < 2^q}` as a dense vector.
fn interval_vector(x: u64, p: u64, g: u64, q: u32) -> Vec<f64> {
    let mut v = vec![0.0; p as usize];
    let len = 1u64 << q;
    let mut e = x;
    for _ in 0..len {
        v[e as usize] += 1.0 / (len as f64).sqrt();
        e = e * g % p;
    }
    v
}

#[test]
fn dlp_kernel_matches_explicit_superposition() {
    let (p, g, q) = (23, 5, 2);
    let group = DlpGroup::new(p, g).unwrap();
    // logs 3 and 5: intervals {3..6} and {5..8} overlap in two of four points.
    let a = [group.pow(3) as f64, group.pow(10) as f64];
    let b = [group.pow(5) as f64, group.pow(10) as f64];
    let k = kernel::dlp_kernel(&a, &b, &group, q).unwrap();
    assert!((k - 0.25).abs() < 1e-12);
    let mut rng = RngKey::new(5).rng();
    for _ in 0..50 {
        let a = [rng.random_range(1..p), rng.random_range(1..p)];
        let b = [rng.random_range(1..p), rng.random_range(1..p)];
        let want: f64 = (0..2)
            .map(|d| {
                let u = interval_vector(a[d], p, g, q);
                let v = interval_vector(b[d], p, g, q);
                u.iter().zip(&v).map(|(s, t)| s * t).sum::<f64>().powi(2)
            })
            .product();
        let af = [a[0] as f64, a[1] as f64];
        let bf = [b[0] as f64, b[1] as f64];
        let got = kernel::dlp_kernel(&af, &bf, &group, q).unwrap();
        assert!((got - want).abs() < 1e-12, "{a:?} {b:?}: {got} vs {want}");
        let emb = Embedding::new(EmbeddingSpec::dlp(p, g, q, 2)).unwrap();
        assert!((emb.exact(&af, &bf).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn dlp_kernel_symmetric_and_bounded_on_full_enumeration() {
    for (p, g) in [(23, 5), (29, 2), (31, 3)] {
        let group = DlpGroup::new(p, g).unwrap();
        for q in 1..=3 {
            for a in 1..p {
                for b in a..p {
                    let k1 = kernel::dlp_kernel(&[a as f64], &[b as f64], &group, q).unwrap();
                    let k2 = kernel::dlp_kernel(&[b as f64], &[a as f64], &group, q).unwrap();
                    assert_eq!(k1, k2);
                    assert!((0.0..=1.0).contains(&k1));
                    if a == b {
                        assert!((k1 - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn interval_overlap_matches_counting() {
    let m = 22;
    for len in [1, 4, 10] {
        for a in 0..m {
            for b in 0..m {
                let set_a: Vec<u64> = (0..len).map(|j| (a + j) % m).collect();
                let count = (0..len).filter(|j| set_a.contains(&((b + j) % m))).count() as u64;
                assert_eq!(dlp::interval_overlap(a, b, len, m), count);
            }
        }
    }
}

#[test]
fn dlp_labels_match_log_table_oracle() {
    for (p, g) in [(23u64, 5u64), (29, 2), (31, 3)] {
        let table = log_table(p, g);
        let half = (p - 3) / 2;
        let in_interval = |x: u64, s: u64| {
            let l = table[x as usize].unwrap();
            (l + (p - 1) - s) % (p - 1) <= half
        };
        let group = DlpGroup::new(p, g).unwrap();
        for (s0, s1) in [(0, 0), (3, 17), (p - 2, 1)] {
            let concept = DlpConcept { p, g, q: 1, s0, s1 };
            assert_eq!(concept.interval_len(), half + 1);
            for x0 in 1..p {
                for x1 in 1..p {
                    let want = if in_interval(x0, s0) ^ in_interval(x1, s1) { 1 } else { -1 };
                    assert_eq!(concept.label(&group, x0, x1).unwrap(), want, "p={p} x=({x0},{x1})");
                }
            }
        }
    }
}

#[test]
fn dlp_dataset_is_deterministic_and_consistent() {
    let concept = DlpConcept { p: 23, g: 5, q: 2, s0: 4, s1: 9 };
    let a = gen_dlp_dataset(&concept, 100, RngKey::new(3)).unwrap();
    let b = gen_dlp_dataset(&concept, 100, RngKey::new(3)).unwrap();
    assert_eq!(a, b);
    let group = concept.group().unwrap();
    for (row, &l) in a.features.rows().into_iter().zip(&a.labels) {
        let s = concept.label(&group, row[0] as u64, row[1] as u64).unwrap();
        assert_eq!(l, usize::from(s > 0));
    }
}
