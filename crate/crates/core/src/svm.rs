//! Soft-margin (L1 hinge) support vector machines solved in the dual by
//! sequential minimal optimisation with second-order working-set selection.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QfError, Result};

const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// Stop once the maximal KKT violation is at most this.
    pub tol: f64,
    /// Iteration budget in units of `N` pair updates.
    pub max_passes: usize,
}

impl SvmParams {
    pub fn new(c: f64) -> Self {
        SvmParams { c, ..Default::default() }
    }
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, tol: 1e-6, max_passes: 200 }
    }
}

/// Output of the dual solver.
#[derive(Clone, Debug)]
pub struct DualSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// `Σα − ½ αᵀQα` at the returned iterate.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Final maximal KKT violation.
    pub violation: f64,
    /// Dual objective after every completed pass, then the final value.
    pub trace: Vec<f64>,
}

fn check_problem(k: ArrayView2<f64>, y: &[f64], params: &SvmParams) -> Result<()> {
    let n = y.len();
    if k.dim() != (n, n) {
        return invalid(format!("kernel matrix {:?} for {n} labels", k.dim()));
    }
    if !(params.c > 0.0) || !params.c.is_finite() {
        return invalid(format!("C must be positive and finite, got {}", params.c));
    }
    if let Some(v) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return invalid(format!("labels must be ±1, got {v}"));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return invalid("both classes must be present to train an SVM");
    }
    Ok(())
}

/// Maximises `Σα − ½ Σ αᵢαⱼyᵢyⱼKᵢⱼ` subject to `0 ≤ α ≤ C`, `Σαy = 0`.
pub fn solve_dual(k: ArrayView2<f64>, y: &[f64], params: &SvmParams) -> Result<DualSolution> {
    check_problem(k, y, params)?;
    let n = y.len();
    let c = params.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * k[[i, j]];
    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;
    let objective = |alpha: &[f64], grad: &[f64]| -> f64 {
        -0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
    };

    let max_iter = params.max_passes.saturating_mul(n.max(1));
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut violation = f64::INFINITY;
    while iterations < max_iter {
        // i: maximal violator in I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let up = if y[t] > 0.0 { !is_upper(alpha[t]) } else { !is_lower(alpha[t]) };
            if up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        // j: second-order choice in I_low.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            let low = if y[t] > 0.0 { !is_lower(alpha[t]) } else { !is_upper(alpha[t]) };
            if !low {
                continue;
            }
            gmax2 = gmax2.max(y[t] * grad[t]);
            if i == usize::MAX {
                continue;
            }
            let b = gmax + y[t] * grad[t];
            if b > 0.0 {
                let a = k[[i, i]] + k[[t, t]] - 2.0 * k[[i, t]];
                let a = if a > 0.0 { a } else { TAU };
                let o = -(b * b) / a;
                if o <= obj_min {
                    obj_min = o;
                    j = t;
                }
            }
        }
        violation = (gmax + gmax2).max(0.0);
        if i == usize::MAX || j == usize::MAX || gmax + gmax2 < params.tol {
            converged = true;
            violation = if i == usize::MAX || j == usize::MAX { 0.0 } else { violation };
            break;
        }

        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_ai, old_aj);
        if y[i] != y[j] {
            let quad = k[[i, i]] + k[[j, j]] + 2.0 * q(i, j);
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = k[[i, i]] + k[[j, j]] - 2.0 * q(i, j);
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (dai, daj) = (ai - old_ai, aj - old_aj);
        for t in 0..n {
            grad[t] += q(i, t) * dai + q(j, t) * daj;
        }
        iterations += 1;
        if n > 0 && iterations % n == 0 {
            trace.push(objective(&alpha, &grad));
        }
    }
    let obj = objective(&alpha, &grad);
    trace.push(obj);

    // Bias: mean over free vectors, else the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut nr_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if is_upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            nr_free += 1;
            sum_free += yg;
        }
    }
    let rho = if nr_free > 0 { sum_free / nr_free as f64 } else { (ub + lb) / 2.0 };

    Ok(DualSolution { alphas: alpha, bias: -rho, objective: obj, converged, iterations, violation, trace })
}

/// Linear SVM with an explicit weight vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub alphas: Vec<f64>,
    pub c: f64,
    pub converged: bool,
}

/// Trains on rows of `features` with ±1 labels.
pub fn train_linear(features: ArrayView2<f64>, y: &[f64], params: &SvmParams) -> Result<LinearModel> {
    if features.nrows() != y.len() {
        return invalid(format!("{} feature rows for {} labels", features.nrows(), y.len()));
    }
    let k = features.dot(&features.t());
    let sol = solve_dual(k.view(), y, params)?;
    let coef: Array1<f64> = sol.alphas.iter().zip(y).map(|(a, y)| a * y).collect();
    let weights = features.t().dot(&coef).to_vec();
    Ok(LinearModel { weights, bias: sol.bias, alphas: sol.alphas, c: params.c, converged: sol.converged })
}

impl LinearModel {
    /// `w·z + b`.
    pub fn decision(&self, z: ArrayView1<f64>) -> Result<f64> {
        if z.len() != self.weights.len() {
            return invalid(format!("feature vector of length {} for {} weights", z.len(), self.weights.len()));
        }
        Ok(z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias)
    }

    /// Geometric margin width `2/‖w‖`.
    pub fn margin(&self) -> Result<f64> {
        let norm = self.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(QfError::DegenerateModel("zero weight vector has no margin".into()));
        }
        Ok(2.0 / norm)
    }
}

/// Kernel SVM in representer form over its training points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub alphas: Vec<f64>,
    pub labels: Vec<f64>,
    pub bias: f64,
    pub support: Vec<usize>,
    pub c: f64,
    pub converged: bool,
}

/// Trains on a precomputed Gram matrix.
pub fn train_kernel(k: ArrayView2<f64>, y: &[f64], params: &SvmParams) -> Result<KernelModel> {
    let sol = solve_dual(k, y, params)?;
    let support = sol.alphas.iter().enumerate().filter(|(_, a)| **a > 0.0).map(|(i, _)| i).collect();
    Ok(KernelModel {
        alphas: sol.alphas,
        labels: y.to_vec(),
        bias: sol.bias,
        support,
        c: params.c,
        converged: sol.converged,
    })
}

impl KernelModel {
    /// `Σ αᵢyᵢ k(xᵢ, x) + b` from the kernel values of `x` against every
    /// training point.
    pub fn decision(&self, kvec: &[f64]) -> Result<f64> {
        if kvec.len() != self.alphas.len() {
            return invalid(format!("{} kernel values for {} training points", kvec.len(), self.alphas.len()));
        }
        Ok(self.support.iter().map(|&i| self.alphas[i] * self.labels[i] * kvec[i]).sum::<f64>() + self.bias)
    }

    /// Decision values for all rows of a test-by-train kernel matrix.
    pub fn decisions(&self, k_test: &Array2<f64>) -> Result<Vec<f64>> {
        k_test.rows().into_iter().map(|r| self.decision(&r.to_vec())).collect()
    }

    /// `2/‖w‖` with `‖w‖² = αᵀQα` evaluated on the training Gram matrix.
    pub fn margin(&self, k: ArrayView2<f64>) -> Result<f64> {
        let mut w2 = 0.0;
        for &i in &self.support {
            for &j in &self.support {
                w2 += self.alphas[i] * self.alphas[j] * self.labels[i] * self.labels[j] * k[[i, j]];
            }
        }
        if !(w2 > 0.0) {
            return Err(QfError::DegenerateModel("zero weight vector has no margin".into()));
        }
        Ok(2.0 / w2.sqrt())
    }
}
