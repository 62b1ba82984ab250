//! Independent reference solvers shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

/// Euclidean projection onto `{0 ≤ α ≤ C, yᵀα = 0}` by bisection on the
/// multiplier of the equality constraint.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |nu: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - nu * yi).clamp(0.0, c)).collect() };
    let h = |nu: f64| at(nu).iter().zip(y).map(|(a, yi)| a * yi).sum::<f64>();
    let span = v.iter().fold(0.0_f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Accelerated projected gradient on `½αᵀQα − Σα`; returns the dual
/// objective `Σα − ½αᵀQα`.
pub fn dual_oracle(k: &Array2<f64>, y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let q = Array2::from_shape_fn((n, n), |(i, j)| y[i] * y[j] * k[[i, j]]);
    let lip = SymmetricEigen::new(DMatrix::from_fn(n, n, |i, j| q[[i, j]])).eigenvalues.max().max(1e-12);
    let obj = |a: &[f64]| {
        let av = ndarray::ArrayView1::from(a);
        av.sum() - 0.5 * av.dot(&q.dot(&av))
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0_f64;
    for _ in 0..20000 {
        let grad = q.dot(&ndarray::ArrayView1::from(&z[..])) - 1.0;
        let step: Vec<f64> = z.iter().zip(grad.iter()).map(|(zi, gi)| zi - gi / lip).collect();
        let next = project(&step, y, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next.iter().zip(&a).map(|(n1, a0)| n1 + (t - 1.0) / t_next * (n1 - a0)).collect();
        a = next;
        t = t_next;
    }
    obj(&a)
}


/// Maximal KKT violation `max_{I_up} −yᵢ∇ᵢ − min_{I_low} −yᵢ∇ᵢ` recomputed
/// from the multipliers.
pub fn kkt_gap(k: &Array2<f64>, y: &[f64], alphas: &[f64], c: f64) -> f64 {
    let n = y.len();
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for i in 0..n {
        let grad = (0..n).map(|j| y[i] * y[j] * k[[i, j]] * alphas[j]).sum::<f64>() - 1.0;
        let v = -y[i] * grad;
        let a = alphas[i];
        if (y[i] > 0.0 && a < c) || (y[i] < 0.0 && a > 0.0) {
            up = up.max(v);
        }
        if (y[i] > 0.0 && a > 0.0) || (y[i] < 0.0 && a < c) {
            low = low.min(v);
        }
    }
    (up - low).max(0.0)
}
