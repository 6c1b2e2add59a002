//! Dense statevector backend and the matrix-exponential reference oracle.

use nalgebra::DMatrix;

use crate::circuit::Gate;
use crate::linalg;
use crate::pauli::{PauliSum, DEFAULT_DENSE_CAP, MAX_QUBITS};
use crate::prelude::*;
use crate::rng::SimRng;
use crate::{Error, Result};

/// Norm tolerance for states that are expected to be normalized.
pub const NORM_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        check_register(n_qubits)?;
        if amps.len() != 1usize << n_qubits {
            return Err(Error::InvalidArgument(format!(
                "{} amplitudes for a {}-qubit register",
                amps.len(),
                n_qubits
            )));
        }
        Ok(Self { n_qubits, amps })
    }

    /// `|0...0>`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis_index(n_qubits, 0)
    }

    pub fn basis_index(n_qubits: usize, index: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::InvalidArgument(format!("basis index {index} out of range")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Haar-random state from normalized complex Gaussians.
    pub fn random(n_qubits: usize, seed: u64) -> Result<Self> {
        check_register(n_qubits)?;
        let mut rng = SimRng::new(seed);
        let amps = (0..1usize << n_qubits).map(|_| rng.complex_normal()).collect();
        Ok(Self { n_qubits, amps }.normalized().0)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Whether the state carries unit norm; unnormalized intermediates
    /// report `false`.
    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= NORM_TOLERANCE
    }

    pub fn require_normalized(&self) -> Result<()> {
        if !self.is_normalized() {
            return Err(Error::InvalidArgument(format!("state has norm {} but must be normalized", self.norm())));
        }
        Ok(())
    }

    /// Normalized copy and the natural log of the discarded norm.
    pub fn normalized(&self) -> (Self, f64) {
        let norm = self.norm();
        let amps = self.amps.iter().map(|a| a / norm).collect();
        (Self { n_qubits: self.n_qubits, amps }, norm.ln())
    }

    pub fn scale(&mut self, factor: C64) {
        for a in &mut self.amps {
            *a *= factor;
        }
    }

    /// Index of the single non-zero amplitude when the state is a
    /// computational basis state up to phase.
    pub fn as_basis_index(&self, tol: f64) -> Option<usize> {
        let (idx, max) = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| (i, a.norm_sqr()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        ((max - 1.0).abs() <= tol).then_some(idx)
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        let m = gate.matrix();
        let shift = self.n_qubits - 1 - gate.target();
        let (mask, value) = gate.control_condition(self.n_qubits);
        apply_single(&mut self.amps, &m, shift, mask, value);
        Ok(())
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        Ok(inner_product(self, other)?.norm_sqr())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Probability that `qubit` reads 0.
    pub fn probability_zero(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange { qubit, n_qubits: self.n_qubits });
        }
        let bit = 1usize << (self.n_qubits - 1 - qubit);
        let total: f64 = self.amps.iter().map(|a| a.norm_sqr()).sum();
        let zero: f64 = self.amps.iter().enumerate().filter(|(i, _)| i & bit == 0).map(|(_, a)| a.norm_sqr()).sum();
        Ok(zero / total)
    }

    pub fn expectation(&self, obs: &PauliSum) -> Result<f64> {
        expectation(self, obs)
    }
}

fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(Error::InvalidArgument("register needs at least one qubit".into()));
    }
    if n_qubits > MAX_QUBITS.min(30) {
        return Err(Error::TooManyQubits { max: 30, found: n_qubits });
    }
    Ok(())
}

/// Applies a 2x2 matrix to the bit at `shift` on every index whose control
/// bits match.
pub(crate) fn apply_single(amps: &mut [C64], m: &[[C64; 2]; 2], shift: usize, ctrl_mask: usize, ctrl_value: usize) {
    let bit = 1usize << shift;
    let dim = amps.len();
    let low_mask = bit - 1;
    for k in 0..dim / 2 {
        let i0 = ((k & !low_mask) << 1) | (k & low_mask);
        if i0 & ctrl_mask != ctrl_value {
            continue;
        }
        let i1 = i0 | bit;
        let a0 = amps[i0];
        let a1 = amps[i1];
        amps[i0] = m[0][0] * a0 + m[0][1] * a1;
        amps[i1] = m[1][0] * a0 + m[1][1] * a1;
    }
}

/// Basis state from a bit string, qubit 0 first: `"10"` is index 2.
pub fn basis_state(n_qubits: usize, bits: &str) -> Result<StateVector> {
    if bits.chars().count() != n_qubits {
        return Err(Error::WordLength { expected: n_qubits, found: bits.chars().count() });
    }
    let mut index = 0usize;
    for ch in bits.chars() {
        index <<= 1;
        match ch {
            '0' => {}
            '1' => index |= 1,
            other => return Err(Error::InvalidArgument(format!("invalid bit {other:?}"))),
        }
    }
    StateVector::basis_index(n_qubits, index)
}

/// Bit string of a basis index, qubit 0 first.
pub fn index_to_bits(n_qubits: usize, index: usize) -> String {
    (0..n_qubits).map(|q| if index >> (n_qubits - 1 - q) & 1 == 1 { '1' } else { '0' }).collect()
}

/// `<a|b>`, conjugate-linear in `a`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<C64> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::QubitCountMismatch { expected: a.n_qubits, found: b.n_qubits });
    }
    Ok(dot(&a.amps, &b.amps))
}

#[inline]
pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `<psi|O|psi>` for a normalized state and Hermitian observable.
pub fn expectation(state: &StateVector, obs: &PauliSum) -> Result<f64> {
    if obs.n_qubits() != state.n_qubits {
        return Err(Error::QubitCountMismatch { expected: state.n_qubits, found: obs.n_qubits() });
    }
    obs.require_hermitian()?;
    state.require_normalized()?;
    Ok(expectation_unchecked(&state.amps, obs))
}

pub(crate) fn expectation_unchecked(amps: &[C64], obs: &PauliSum) -> f64 {
    let mut total = 0.0;
    for term in obs.terms() {
        let mut acc = C64::new(0.0, 0.0);
        if term.word.is_diagonal() {
            for (idx, a) in amps.iter().enumerate() {
                let (phase, _) = term.word.apply_to_index(idx);
                acc += phase * a.norm_sqr();
            }
        } else {
            for (idx, &a) in amps.iter().enumerate() {
                let (phase, target) = term.word.apply_to_index(idx);
                acc += amps[target].conj() * phase * a;
            }
        }
        total += (term.coeff * acc).re;
    }
    total
}

/// Quantity measured on a normalized state.
#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    /// Expectation value of a Hermitian Pauli sum.
    Pauli(PauliSum),
    /// Squared overlap `|<p|psi>|^2` with a fixed state.
    Projector(StateVector),
}

impl Observable {
    pub fn evaluate(&self, state: &StateVector) -> Result<f64> {
        match self {
            Observable::Pauli(op) => expectation(state, op),
            Observable::Projector(p) => {
                state.require_normalized()?;
                p.fidelity(state)
            }
        }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            Observable::Pauli(op) => op.n_qubits(),
            Observable::Projector(p) => p.n_qubits(),
        }
    }
}

/// Normalized output of a possibly non-unitary evolution together with the
/// natural log of the norm that normalization removed.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionResult {
    pub state: StateVector,
    pub log_norm: f64,
}

/// Dense `exp(-iHt)` for a fixed Hamiltonian and time.
#[derive(Clone, Debug)]
pub struct Propagator {
    n_qubits: usize,
    matrix: DMatrix<C64>,
}

impl Propagator {
    pub fn new(h: &PauliSum, t: f64) -> Result<Self> {
        Self::with_cap(h, t, DEFAULT_DENSE_CAP)
    }

    pub fn with_cap(h: &PauliSum, t: f64, cap: usize) -> Result<Self> {
        let dense = h.to_dense_with_cap(cap)?;
        let generator = dense.map(|z| z * C64::new(0.0, -t));
        Ok(Self { n_qubits: h.n_qubits(), matrix: linalg::expm(&generator)? })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Unnormalized `exp(-iHt)|psi>`.
    pub fn apply_raw(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.n_qubits != self.n_qubits {
            return Err(Error::QubitCountMismatch { expected: self.n_qubits, found: psi.n_qubits });
        }
        Ok(StateVector { n_qubits: self.n_qubits, amps: linalg::matvec(&self.matrix, &psi.amps) })
    }

    pub fn apply(&self, psi: &StateVector) -> Result<EvolutionResult> {
        let raw = self.apply_raw(psi)?;
        let (state, log_norm) = raw.normalized();
        Ok(EvolutionResult { state, log_norm })
    }
}

/// Reference oracle: normalized `exp(-iHt)|psi0>` by dense matrix
/// exponential, with the log of the pre-normalization norm.
pub fn exact_evolve(h: &PauliSum, t: f64, psi0: &StateVector) -> Result<EvolutionResult> {
    Propagator::new(h, t)?.apply(psi0)
}

/// Histogram of measurement outcomes keyed by basis index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    n_qubits: usize,
    table: BTreeMap<usize, u64>,
}

impl Counts {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, table: BTreeMap::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn add(&mut self, index: usize, count: u64) {
        if count > 0 {
            *self.table.entry(index).or_insert(0) += count;
        }
    }

    pub fn add_bits(&mut self, bits: &str, count: u64) -> Result<()> {
        let idx = basis_state(self.n_qubits, bits)?.as_basis_index(0.0).expect("basis state");
        self.add(idx, count);
        Ok(())
    }

    pub fn get(&self, index: usize) -> u64 {
        self.table.get(&index).copied().unwrap_or(0)
    }

    pub fn get_bits(&self, bits: &str) -> u64 {
        basis_state(self.n_qubits, bits)
            .ok()
            .and_then(|s| s.as_basis_index(0.0))
            .map_or(0, |idx| self.get(idx))
    }

    pub fn total(&self) -> u64 {
        self.table.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.table.iter().map(|(&k, &v)| (k, v))
    }

    pub fn iter_bits(&self) -> impl Iterator<Item = (String, u64)> + '_ {
        self.iter().map(move |(k, v)| (index_to_bits(self.n_qubits, k), v))
    }

    /// Empirical distribution over all `2^n` outcomes.
    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.total() as f64;
        let mut f = vec![0.0; 1usize << self.n_qubits];
        if total > 0.0 {
            for (k, v) in self.iter() {
                f[k] = v as f64 / total;
            }
        }
        f
    }
}

/// Multinomial sample of `shots` computational-basis measurements.
pub fn sample_counts(state: &StateVector, shots: u64, seed: u64) -> Result<Counts> {
    if shots == 0 {
        return Err(Error::NoShots);
    }
    state.require_normalized()?;
    let mut rng = SimRng::new(seed);
    let mut counts = Counts::new(state.n_qubits);
    // Sequential conditional binomials: exact multinomial in O(2^n) draws.
    let mut remaining = shots;
    let mut mass_left = 1.0f64;
    for (idx, p) in state.probabilities().into_iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let q = if mass_left > 0.0 { (p / mass_left).clamp(0.0, 1.0) } else { 1.0 };
        let k = rng.binomial(remaining, q);
        counts.add(idx, k);
        remaining -= k;
        mass_left -= p;
    }
    if remaining > 0 {
        // Rounding left mass on the last non-zero outcome.
        let last = state.probabilities().iter().rposition(|&p| p > 0.0).unwrap_or(0);
        counts.add(last, remaining);
    }
    Ok(counts)
}
