//! Dense symmetric linear algebra used by the Nyström, SVM and data modules.
//!
//! The eigen-solver is a cyclic Jacobi sweep. Matrices here are at most a few
//! hundred rows, where Jacobi is accurate to machine precision and simple to
//! reason about.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const SYMMETRY_TOL: f64 = 1e-8;
const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-12;

/// A square matrix checked to be symmetric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix(Array2<f64>);

impl SymMatrix {
    /// Wraps `a` after checking squareness and symmetry within [`SYMMETRY_TOL`]
    /// (relative to the largest entry when that exceeds one).
    pub fn new(a: Array2<f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return invalid(format!("matrix is {r}x{c}, expected square"));
        }
        let scale = a.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..r {
            for j in (i + 1)..r {
                if (a[[i, j]] - a[[j, i]]).abs() > SYMMETRY_TOL * scale {
                    return invalid(format!(
                        "matrix not symmetric at ({i},{j}): {} vs {}",
                        a[[i, j]],
                        a[[j, i]]
                    ));
                }
            }
        }
        Ok(SymMatrix(a))
    }

    /// Replaces `a` with `(a + aᵀ)/2`.
    pub fn symmetrized(a: ArrayView2<f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return invalid(format!("matrix is {r}x{c}, expected square"));
        }
        let s = (&a + &a.t()) * 0.5;
        Ok(SymMatrix(s))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Array2::eye(n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Eigen-decomposition `A = U diag(values) Uᵀ`, values sorted descending and
/// eigenvectors stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

impl Eigh {
    /// Rebuilds `U f(Λ) Uᵀ` using only eigenpairs for which `f` returns `Some`.
    pub fn reconstruct_with(&self, mut f: impl FnMut(f64) -> Option<f64>) -> Array2<f64> {
        let n = self.vectors.nrows();
        let mut out = Array2::zeros((n, n));
        for (k, &lambda) in self.values.iter().enumerate() {
            let Some(s) = f(lambda) else { continue };
            let u = self.vectors.column(k);
            for i in 0..n {
                let ui = u[i] * s;
                if ui == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[[i, j]] += ui * u[j];
                }
            }
        }
        out
    }
}

/// Symmetric eigen-decomposition by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius mass drops below
/// `1e-12 · ‖A‖_F`.
pub fn eigh(a: &SymMatrix) -> Eigh {
    let n = a.dim();
    let mut m: Vec<f64> = a.as_array().iter().copied().collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let fro = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = JACOBI_REL_TOL * fro;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() <= threshold || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]).then(i.cmp(&j)));
    let values = Array1::from_iter(order.iter().map(|&i| m[i * n + i]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, dst]] = v[k * n + src];
        }
    }
    Eigh { values, vectors }
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix. Eigenvalues whose
/// magnitude is at most `rel_cutoff · max|λ|` are treated as zero.
pub fn pinv(a: &SymMatrix, rel_cutoff: f64) -> SymMatrix {
    let e = eigh(a);
    let lmax = e.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cut = rel_cutoff * lmax;
    let out = e.reconstruct_with(|l| (l.abs() > cut && lmax > 0.0).then(|| 1.0 / l));
    SymMatrix(out)
}

/// Principal square root of a PSD matrix; negative eigenvalues are clamped
/// to zero.
pub fn sqrt_psd(a: &SymMatrix) -> SymMatrix {
    let e = eigh(a);
    SymMatrix(e.reconstruct_with(|l| (l > 0.0).then(|| l.sqrt())))
}

pub fn frobenius(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest singular value of `a` by power iteration on `aᵀa`.
pub fn spectral_norm(a: ArrayView2<f64>, max_iter: usize, rel_tol: f64) -> f64 {
    let (_, cols) = a.dim();
    if cols == 0 || a.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    let ata = a.t().dot(&a);
    // A fixed non-symmetric start vector avoids being orthogonal to the top
    // singular vector on structured inputs.
    let mut v = Array1::from_iter((0..cols).map(|i| 1.0 + 0.1 * ((i * 7919 % 97) as f64) / 97.0));
    v /= v.dot(&v).sqrt();
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = ata.dot(&v);
        let next = v.dot(&w);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let converged = (next - lambda).abs() <= rel_tol * next.abs();
        lambda = next;
        if converged {
            break;
        }
    }
    lambda.max(0.0).sqrt()
}

/// `a[rows, :]`.
pub fn select_rows(a: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    a.select(Axis(0), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn random_sym(n: usize, seed: u64) -> Array2<f64> {
        use rand::Rng;
        let mut rng = crate::rng::RngKey::new(seed).rng();
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                a[[i, j]] = x;
                a[[j, i]] = x;
            }
        }
        a
    }

    #[test]
    fn diagonal_spectrum() {
        let e = eigh(&SymMatrix::new(array![[1.0, 0.0], [0.0, 3.0]]).unwrap());
        assert_eq!(e.values.to_vec(), vec![3.0, 1.0]);
        assert!((e.vectors[[1, 0]].abs() - 1.0).abs() < 1e-15);
        assert!((e.vectors[[0, 1]].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_asymmetric() {
        assert!(SymMatrix::new(array![[1.0, 2.0], [0.0, 1.0]]).is_err());
        assert!(SymMatrix::new(Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn rotated_diagonal_recovers_spectrum() {
        let (c, s) = (0.3_f64.cos(), 0.3_f64.sin());
        let r = array![[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
        let d = Array2::from_diag(&array![5.0, -2.0, 0.5]);
        let a = r.dot(&d).dot(&r.t());
        let e = eigh(&SymMatrix::symmetrized(a.view()).unwrap());
        for (got, want) in e.values.iter().zip([5.0, 0.5, -2.0]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn reconstruction_and_orthonormality_random() {
        for seed in 0..50 {
            let a = random_sym(8, seed);
            let e = eigh(&SymMatrix::new(a.clone()).unwrap());
            let rec = e.reconstruct_with(Some);
            assert!(frobenius((&rec - &a).view()) < 1e-8);
            let utu = e.vectors.t().dot(&e.vectors);
            assert!(frobenius((&utu - &Array2::<f64>::eye(8)).view()) < 1e-8);
            for w in e.values.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn pinv_cases() {
        let p = pinv(&SymMatrix::identity(3), 1e-10);
        assert!(frobenius((p.as_array() - &Array2::<f64>::eye(3)).view()) < 1e-14);
        let p = pinv(&SymMatrix::new(array![[2.0, 0.0], [0.0, 0.0]]).unwrap(), 1e-10);
        assert_eq!(p.as_array(), &array![[0.5, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn pinv_penrose_conditions_rank_two() {
        let g = array![[1.0, 0.2], [0.3, -1.0], [0.5, 0.5], [2.0, 0.1], [-0.4, 0.9]];
        let a = g.dot(&g.t());
        let s = SymMatrix::symmetrized(a.view()).unwrap();
        let p = pinv(&s, 1e-10).into_inner();
        let apa = a.dot(&p).dot(&a);
        let pap = p.dot(&a).dot(&p);
        assert!(frobenius((&apa - &a).view()) < 1e-6);
        assert!(frobenius((&pap - &p).view()) < 1e-6);
        let ap = a.dot(&p);
        let pa = p.dot(&a);
        assert!(frobenius((&ap - &ap.t()).view()) < 1e-6);
        assert!(frobenius((&pa - &pa.t()).view()) < 1e-6);
    }

    #[test]
    fn spectral_norm_diag() {
        let d = array![[3.0, 0.0], [0.0, 1.0]];
        assert!((spectral_norm(d.view(), 200, 1e-8) - 3.0).abs() < 1e-6);
        assert_eq!(spectral_norm(Array2::<f64>::zeros((3, 3)).view(), 200, 1e-8), 0.0);
    }

    #[test]
    fn sqrt_squares_back() {
        let g = array![[1.0, 0.2, 0.0], [0.3, -1.0, 0.4], [0.5, 0.5, 0.5]];
        let a = SymMatrix::symmetrized(g.dot(&g.t()).view()).unwrap();
        let r = sqrt_psd(&a).into_inner();
        assert!(frobenius((&r.dot(&r) - a.as_array()).view()) < 1e-10);
    }
}
