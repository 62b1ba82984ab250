//! A small statevector simulator for the data-embedding circuits.
//!
//! Qubit `j` is bit `j` of the basis-state index (little endian). Only pure
//! states are represented; shot noise is modelled separately by
//! [`sample_fidelity`].

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::dlp::DlpGroup;
use crate::error::{invalid, Result};
use crate::rng::{fnv1a, RngKey};

pub const MAX_QUBITS: usize = 20;
const FIDELITY_CLAMP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return invalid(format!("qubit count {n_qubits} outside 1..={MAX_QUBITS}"));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amplitudes })
    }

    /// Wraps raw amplitudes; length must be a power of two and the norm one.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return invalid(format!("amplitude count {len} is not 2^n with n >= 1"));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return invalid(format!("state norm {norm} != 1"));
        }
        Ok(StateVector { n_qubits: len.trailing_zeros() as usize, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn apply_1q(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        let stride = 1 << q;
        for base in 0..self.amplitudes.len() {
            if base & stride != 0 {
                continue;
            }
            let a0 = self.amplitudes[base];
            let a1 = self.amplitudes[base | stride];
            self.amplitudes[base] = m[0][0] * a0 + m[0][1] * a1;
            self.amplitudes[base | stride] = m[1][0] * a0 + m[1][1] * a1;
        }
    }

    fn hadamard_all(&mut self) {
        for q in 0..self.n_qubits {
            let stride = 1 << q;
            for base in 0..self.amplitudes.len() {
                if base & stride != 0 {
                    continue;
                }
                let a0 = self.amplitudes[base];
                let a1 = self.amplitudes[base | stride];
                self.amplitudes[base] = (a0 + a1) * FRAC_1_SQRT_2;
                self.amplitudes[base | stride] = (a0 - a1) * FRAC_1_SQRT_2;
            }
        }
    }

    fn ry(&mut self, q: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let (c, s) = (Complex64::new(c, 0.0), Complex64::new(s, 0.0));
        self.apply_1q(q, [[c, -s], [s, c]]);
    }

    fn rz(&mut self, q: usize, theta: f64) {
        let zero = Complex64::new(0.0, 0.0);
        self.apply_1q(
            q,
            [[Complex64::from_polar(1.0, -theta / 2.0), zero], [zero, Complex64::from_polar(1.0, theta / 2.0)]],
        );
    }

    fn cnot(&mut self, control: usize, target: usize) {
        let (cm, tm) = (1 << control, 1 << target);
        for i in 0..self.amplitudes.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amplitudes.swap(i, i | tm);
            }
        }
    }

    /// Nearest-neighbour CNOT ladder: pairs (0,1),(2,3),… then (1,2),(3,4),….
    fn entangling_ladder(&mut self) {
        let n = self.n_qubits;
        for start in [0, 1] {
            let mut c = start;
            while c + 1 < n {
                self.cnot(c, c + 1);
                c += 2;
            }
        }
    }
}

/// Which embedding circuit maps features to states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingSpec {
    /// IQP-style embedding; input dimension must equal `n_qubits`.
    Iqp { n_qubits: usize },
    /// Hardware-efficient ansatz; `layers` defaults to `n_qubits`.
    Hea {
        n_qubits: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layers: Option<usize>,
    },
    /// Discrete-log interval states over `dims` copies of Z_p*.
    DlpInterval { p: u64, g: u64, q: u32, dims: usize },
}

impl EmbeddingSpec {
    pub fn iqp(n_qubits: usize) -> Self {
        EmbeddingSpec::Iqp { n_qubits }
    }

    pub fn hea(n_qubits: usize) -> Self {
        EmbeddingSpec::Hea { n_qubits, layers: None }
    }

    pub fn dlp(p: u64, g: u64, q: u32, dims: usize) -> Self {
        EmbeddingSpec::DlpInterval { p, g, q, dims }
    }

    /// Checks structural invariants. For the DLP variant this brute-forces the
    /// generator check, so callers should keep the returned group.
    pub fn validate(&self) -> Result<Option<DlpGroup>> {
        match *self {
            EmbeddingSpec::Iqp { n_qubits } | EmbeddingSpec::Hea { n_qubits, .. } => {
                if n_qubits == 0 || n_qubits > MAX_QUBITS {
                    return invalid(format!("qubit count {n_qubits} outside 1..={MAX_QUBITS}"));
                }
                if let EmbeddingSpec::Hea { layers: Some(0), .. } = self {
                    return invalid("hardware-efficient embedding needs at least one layer");
                }
                Ok(None)
            }
            EmbeddingSpec::DlpInterval { p, g, q, dims } => {
                if !(1..=2).contains(&dims) {
                    return invalid(format!("dlp dims must be 1 or 2, got {dims}"));
                }
                let group = DlpGroup::new(p, g)?;
                if q >= 63 || (1u64 << q) > p - 1 {
                    return invalid(format!("2^q = 2^{q} exceeds p - 1 = {}", p - 1));
                }
                Ok(Some(group))
            }
        }
    }

    /// Stable identifier used for cache keying.
    pub fn id(&self) -> u64 {
        fnv1a(self.descriptor().as_bytes())
    }

    pub fn descriptor(&self) -> String {
        match *self {
            EmbeddingSpec::Iqp { n_qubits } => format!("iqp:{n_qubits}"),
            EmbeddingSpec::Hea { n_qubits, layers } => format!("hea:{n_qubits}:{}", layers.unwrap_or(n_qubits)),
            EmbeddingSpec::DlpInterval { p, g, q, dims } => format!("dlp:{p}:{g}:{q}:{dims}"),
        }
    }

    /// Feature dimension this embedding accepts, if fixed.
    pub fn input_dim(&self) -> Option<usize> {
        match *self {
            EmbeddingSpec::Iqp { n_qubits } => Some(n_qubits),
            EmbeddingSpec::Hea { .. } => None,
            EmbeddingSpec::DlpInterval { dims, .. } => Some(dims),
        }
    }

    /// Simulates the embedding circuit for `x`.
    pub fn embed(&self, x: &[f64]) -> Result<StateVector> {
        match *self {
            EmbeddingSpec::Iqp { n_qubits } => embed_iqp(x, n_qubits),
            EmbeddingSpec::Hea { n_qubits, layers } => embed_hea(x, n_qubits, layers.unwrap_or(n_qubits)),
            EmbeddingSpec::DlpInterval { .. } => {
                let group = self.validate()?.expect("dlp validation yields a group");
                let EmbeddingSpec::DlpInterval { q, .. } = *self else { unreachable!() };
                embed_dlp(x, &group, q)
            }
        }
    }
}

/// Measurement budget per kernel entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotPlan {
    Exact,
    Sampled { shots: u64 },
}

impl ShotPlan {
    pub fn from_shots(shots: Option<u64>) -> Self {
        shots.map_or(ShotPlan::Exact, |shots| ShotPlan::Sampled { shots })
    }

    pub fn shots(&self) -> Option<u64> {
        match *self {
            ShotPlan::Exact => None,
            ShotPlan::Sampled { shots } => Some(shots),
        }
    }

    pub fn descriptor(&self) -> String {
        match *self {
            ShotPlan::Exact => "exact".to_string(),
            ShotPlan::Sampled { shots } => format!("m{shots}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ShotPlan::Sampled { shots: 0 } = self {
            return invalid("shot count must be at least 1");
        }
        Ok(())
    }
}

fn zz_phase(x: &[f64], basis: usize) -> f64 {
    let n = x.len();
    let z = |j: usize| if basis >> j & 1 == 0 { 1.0 } else { -1.0 };
    let mut phase = 0.0;
    for j in 0..n {
        let zj = z(j);
        phase += x[j] * zj;
        for k in (j + 1)..n {
            phase += x[j] * x[k] * zj * z(k);
        }
    }
    phase
}

/// `U_Z(x) H^⊗n U_Z(x) H^⊗n |0⟩` where `U_Z` is diagonal with phase
/// `Σ_j x_j z_j + Σ_{j<k} x_j x_k z_j z_k` on basis states.
pub fn embed_iqp(x: &[f64], n_qubits: usize) -> Result<StateVector> {
    if x.len() != n_qubits {
        return invalid(format!("IQP embedding on {n_qubits} qubits needs {n_qubits} features, got {}", x.len()));
    }
    let mut state = StateVector::zero(n_qubits)?;
    let phases: Vec<Complex64> = (0..1usize << n_qubits).map(|b| Complex64::from_polar(1.0, zz_phase(x, b))).collect();
    for _ in 0..2 {
        state.hadamard_all();
        for (a, p) in state.amplitudes.iter_mut().zip(&phases) {
            *a *= p;
        }
    }
    Ok(state)
}

/// Hardware-efficient embedding: each layer applies RY rotations, a CNOT
/// ladder, RZ rotations and a second ladder. Features are cycled with index
/// `2nl + j mod D` for RY and `2nl + n + j mod D` for RZ.
pub fn embed_hea(x: &[f64], n_qubits: usize, layers: usize) -> Result<StateVector> {
    if x.is_empty() {
        return invalid("hardware-efficient embedding needs at least one feature");
    }
    if layers == 0 {
        return invalid("hardware-efficient embedding needs at least one layer");
    }
    let d = x.len();
    let n = n_qubits;
    let mut state = StateVector::zero(n)?;
    for l in 0..layers {
        for j in 0..n {
            state.ry(j, x[(2 * n * l + j) % d]);
        }
        state.entangling_ladder();
        for j in 0..n {
            state.rz(j, x[(2 * n * l + n + j) % d]);
        }
        state.entangling_ladder();
    }
    Ok(state)
}

/// Interval state `2^{-q/2} Σ_{j<2^q} |x·g^j⟩` per coordinate, tensored over
/// coordinates; each factor uses `ceil(log2 p)` qubits.
pub fn embed_dlp(x: &[f64], group: &DlpGroup, q: u32) -> Result<StateVector> {
    let p = group.p();
    let bits = (64 - (p - 1).leading_zeros()) as usize;
    let n_qubits = bits * x.len();
    let mut state = StateVector::zero(n_qubits)?;
    state.amplitudes[0] = Complex64::new(0.0, 0.0);
    let len = 1u64 << q;
    let amp = Complex64::new(1.0 / ((len as f64).powi(x.len() as i32)).sqrt(), 0.0);
    let factors: Vec<Vec<u64>> = x
        .iter()
        .map(|&v| {
            let xi = crate::kernel::as_group_element(v, p)?;
            let base = group.log(xi)?;
            Ok((0..len).map(|j| group.pow(base + j)).collect())
        })
        .collect::<Result<_>>()?;
    let mut idx = vec![0usize; factors.len()];
    loop {
        let mut basis = 0usize;
        for (f, (&i, vals)) in idx.iter().zip(&factors).enumerate() {
            basis |= (vals[i] as usize) << (f * bits);
        }
        state.amplitudes[basis] += amp;
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(state);
            }
            idx[k] += 1;
            if idx[k] < len as usize {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    if a.n_qubits != b.n_qubits {
        return invalid(format!("fidelity between {}- and {}-qubit states", a.n_qubits, b.n_qubits));
    }
    let inner: Complex64 = a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| x.conj() * y).sum();
    Ok(inner.norm_sqr().min(1.0))
}

/// Shot-noise estimate of a fidelity: `Binomial(M, f) / M` in sampled mode.
pub fn sample_fidelity(f: f64, plan: ShotPlan, key: RngKey) -> Result<f64> {
    if !(-FIDELITY_CLAMP_TOL..=1.0 + FIDELITY_CLAMP_TOL).contains(&f) || f.is_nan() {
        return invalid(format!("fidelity {f} outside [0, 1]"));
    }
    let f = f.clamp(0.0, 1.0);
    match plan {
        ShotPlan::Exact => Ok(f),
        ShotPlan::Sampled { shots } => {
            if shots == 0 {
                return invalid("shot count must be at least 1");
            }
            let dist = Binomial::new(shots, f).map_err(|e| crate::error::QfError::InvalidInput(e.to_string()))?;
            let hits = dist.sample(&mut key.rng());
            Ok(hits as f64 / shots as f64)
        }
    }
}
