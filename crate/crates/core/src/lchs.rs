//! Linear combination of Hamiltonian simulations.
//!
//! For `H = H0 + iV` with shift `x`, `V' = V - xI` is negative semidefinite
//! and
//!
//! ```text
//! exp(-iHt) = e^{xt} exp(-i(H0 + iV')t) ~ e^{xt} sum_k c_k exp(-i(H0 - kV')t)
//! ```
//!
//! with the Cauchy weights `c_k = dk / (pi (1 + k^2))` on the uniform grid
//! `k = -K, -K + dk, ..., K`.

use core::f64::consts::PI;

use crate::circuit::trotter_circuit_steps;
use crate::linalg::{hermitian_eigenvalues, HermitianEvolver};
use crate::par;
use crate::pauli::{PauliSum, SplitHamiltonian, DEFAULT_DENSE_CAP};
use crate::prelude::*;
use crate::statevec::{exact_evolve, EvolutionResult, Observable, StateVector};
use crate::{Error, Result};

/// Slack allowed on the largest eigenvalue of `V - xI`.
const SHIFT_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureNode {
    pub k: f64,
    pub weight: f64,
}

/// Uniform Cauchy-kernel quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    k_max: f64,
    dk: f64,
    nodes: Vec<QuadratureNode>,
}

impl Quadrature {
    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    pub fn dk(&self) -> f64 {
        self.dk
    }

    pub fn nodes(&self) -> &[QuadratureNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_k c_k`, slightly below 1 for finite `K`.
    pub fn weight_sum(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }
}

/// `dk / (pi (1 + k^2))`.
pub fn cauchy_weight(k: f64, dk: f64) -> f64 {
    dk / (PI * (1.0 + k * k))
}

/// Nodes `-K..=K` in steps of `dk`. `K / dk` must be an integer.
pub fn build_quadrature(k_max: f64, dk: f64) -> Result<Quadrature> {
    if !(k_max.is_finite() && dk.is_finite()) || k_max <= 0.0 || dk <= 0.0 {
        return Err(Error::InvalidQuadrature(format!("K = {k_max} and dk = {dk} must be positive")));
    }
    let ratio = k_max / dk;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidQuadrature(format!("K / dk = {ratio} is not an integer")));
    }
    let steps = steps as i64;
    let nodes = (-steps..=steps)
        .map(|j| {
            let k = j as f64 * dk;
            QuadratureNode { k, weight: cauchy_weight(k, dk) }
        })
        .collect();
    Ok(Quadrature { k_max, dk, nodes })
}

/// `H0 - k (V - xI)`.
pub fn node_generator(split: &SplitHamiltonian, k: f64) -> PauliSum {
    split.h0().sub(&split.shifted_v().scale(C64::new(k, 0.0))).expect("same register")
}

/// How each node unitary `exp(-i(H0 - kV')t)` is realized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NodeMode {
    /// Dense spectral evolution (exact up to rounding).
    #[default]
    Exact,
    /// First-order Trotter circuit with the given number of slices.
    Trotter { steps: usize },
}

enum NodeBackend {
    Exact(Vec<HermitianEvolver>),
    Trotter { generators: Vec<PauliSum>, steps: usize },
}

/// Precomputed node unitaries for a fixed Hamiltonian and quadrature.
pub struct LchsPropagator {
    n_qubits: usize,
    shift: f64,
    weights: Vec<f64>,
    backend: NodeBackend,
}

impl LchsPropagator {
    pub fn new(split: &SplitHamiltonian, quad: &Quadrature, mode: NodeMode) -> Result<Self> {
        let n = split.n_qubits();
        if n > DEFAULT_DENSE_CAP {
            return Err(Error::DenseCapExceeded { n_qubits: n, cap: DEFAULT_DENSE_CAP });
        }
        let v_shifted = split.shifted_v();
        if !v_shifted.is_empty() {
            let top = hermitian_eigenvalues(&v_shifted.to_dense()?).last().copied().unwrap_or(0.0);
            if top > SHIFT_SLACK {
                return Err(Error::ShiftViolated { max_eigenvalue: top });
            }
        }
        let generators: Vec<PauliSum> = quad.nodes().iter().map(|node| node_generator(split, node.k)).collect();
        let backend = match mode {
            NodeMode::Exact => {
                let evolvers = par::map(&generators, |g| HermitianEvolver::new(&g.to_dense()?));
                NodeBackend::Exact(evolvers.into_iter().collect::<Result<Vec<_>>>()?)
            }
            NodeMode::Trotter { steps } => {
                if steps == 0 {
                    return Err(Error::InvalidArgument("Trotter step count must be positive".into()));
                }
                NodeBackend::Trotter { generators, steps }
            }
        };
        Ok(Self { n_qubits: n, shift: split.shift(), weights: quad.nodes().iter().map(|n| n.weight).collect(), backend })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `exp(-i(H0 - k_j V')t) psi` for every node, in node order.
    pub fn node_states(&self, t: f64, psi: &StateVector) -> Result<Vec<Vec<C64>>> {
        if psi.n_qubits() != self.n_qubits {
            return Err(Error::QubitCountMismatch { expected: self.n_qubits, found: psi.n_qubits() });
        }
        match &self.backend {
            NodeBackend::Exact(evolvers) => Ok(par::map(evolvers, |e| e.apply(t, psi.amplitudes()))),
            NodeBackend::Trotter { generators, steps } => {
                let states = par::map(generators, |g| -> Result<Vec<C64>> {
                    let mut s = psi.clone();
                    trotter_circuit_steps(g, t, *steps)?.apply(&mut s)?;
                    Ok(s.into_amplitudes())
                });
                states.into_iter().collect()
            }
        }
    }

    /// Unnormalized `sum_k c_k U_k psi`, summed in node order.
    pub fn weighted_sum(&self, t: f64, psi: &StateVector) -> Result<StateVector> {
        let states = self.node_states(t, psi)?;
        let mut acc = vec![C64::new(0.0, 0.0); psi.dim()];
        for (w, s) in self.weights.iter().zip(&states) {
            for (a, x) in acc.iter_mut().zip(s) {
                *a += x * *w;
            }
        }
        StateVector::new(self.n_qubits, acc)
    }

    /// Normalized approximation of `exp(-iHt) psi`. The log-norm includes the
    /// shift factor `e^{xt}` and divides out `sum_k c_k` so that `t = 0`
    /// gives zero.
    pub fn apply(&self, t: f64, psi: &StateVector) -> Result<EvolutionResult> {
        let raw = self.weighted_sum(t, psi)?;
        let (state, ln_raw) = raw.normalized();
        if !ln_raw.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(EvolutionResult { state, log_norm: ln_raw - self.weight_sum().ln() + self.shift * t })
    }
}

/// Quadrature approximation of `exp(-iHt) psi0` with exact node unitaries.
pub fn lchs_apply(split: &SplitHamiltonian, quad: &Quadrature, t: f64, psi0: &StateVector) -> Result<EvolutionResult> {
    LchsPropagator::new(split, quad, NodeMode::Exact)?.apply(t, psi0)
}

pub fn lchs_apply_mode(
    split: &SplitHamiltonian,
    quad: &Quadrature,
    t: f64,
    psi0: &StateVector,
    mode: NodeMode,
) -> Result<EvolutionResult> {
    LchsPropagator::new(split, quad, mode)?.apply(t, psi0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorPoint {
    pub t: f64,
    pub lchs: f64,
    pub exact: f64,
    pub abs_error: f64,
}

/// Observable from a single evolution over `[0, t]` by both the quadrature
/// and the matrix-exponential oracle, for every `t` in the grid.
pub fn lchs_error_curve(
    split: &SplitHamiltonian,
    quad: &Quadrature,
    t_grid: &[f64],
    psi0: &StateVector,
    observable: &Observable,
) -> Result<Vec<ErrorPoint>> {
    if observable.n_qubits() != split.n_qubits() {
        return Err(Error::QubitCountMismatch { expected: split.n_qubits(), found: observable.n_qubits() });
    }
    let prop = LchsPropagator::new(split, quad, NodeMode::Exact)?;
    let h = split.reconstruct();
    t_grid
        .iter()
        .map(|&t| {
            let lchs = observable.evaluate(&prop.apply(t, psi0)?.state)?;
            let exact = observable.evaluate(&exact_evolve(&h, t, psi0)?.state)?;
            Ok(ErrorPoint { t, lchs, exact, abs_error: (lchs - exact).abs() })
        })
        .collect()
}
