//! Variational time stepping.
//!
//! Each step trains the ansatz state `psi(theta)` to follow the normalized
//! image of the previous ansatz state `psi_m = U(theta_m)|0>` under one
//! step of `exp(-iH dt)`. The fidelity loss comes from one of three
//! backends: the dense propagator, the quadrature sum of exact node
//! unitaries, or Hadamard-test estimates of every node overlap. An optional
//! penalty pins observables to target values.

use core::sync::atomic::{AtomicU64, Ordering};
use core::f64::consts::FRAC_PI_2;

use crate::circuit::{AnsatzSpec, Circuit, Gate, ParamCircuit};
use crate::hadamard::{simplify_pair, simplify_uk_pass};
use crate::circuit::trotter_circuit;
use crate::lchs::{build_quadrature, node_generator, LchsPropagator, NodeMode, Quadrature};
use crate::mitigation::{apply_readout_noise, diagonal_of, mitigate, CalibrationMatrix, ReadoutNoiseModel};
use crate::models::ObservableSpec;
use crate::optim::{minimize, BfgsOptions};
use crate::par;
use crate::pauli::{hermitian_split, Pauli, PauliSum, SplitHamiltonian};
use crate::prelude::*;
use crate::rng::SimRng;
use crate::statevec::{apply_single, dot, expectation_unchecked, sample_counts, Propagator, StateVector};
use crate::{Error, Result};

/// How the fidelity loss is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossBackend {
    /// `exp(-iH dt)` by dense matrix exponential.
    DirectExpm,
    /// `sum_k c_k U_k` with node unitaries realized per `mode`.
    LchsSum { mode: NodeMode },
    /// Node overlaps from simplified Hadamard-test circuits, sampled with
    /// `VqsConfig::shots` per circuit (exact ancilla probabilities when
    /// `shots` is `None`).
    SampledCircuit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GradientMethod {
    /// Finite differences for the exact backends, parameter shift for the
    /// sampled one.
    #[default]
    Auto,
    FiniteDifference,
    ParameterShift,
    /// Reverse-mode sweep through the ansatz; exact backends only.
    Adjoint,
}

/// Whether scalar factors are divided out of the fidelity modulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LossNormalization {
    /// `1 - |<psi(theta)|phi>|^2 / ||phi||^2`: zero at the ideal step.
    #[default]
    Normalized,
    /// `1 - |sum_k c_k X_k|^2` (quadrature backends) or
    /// `1 - |<psi(theta)| exp(-i(H0 + iV')dt) |psi_m>|^2` (direct).
    Raw,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VqsConfig {
    pub hamiltonian: PauliSum,
    pub dt: f64,
    pub total_time: f64,
    pub ansatz: AnsatzSpec,
    pub quadrature: Quadrature,
    pub penalty_coeff: f64,
    pub penalty_observables: Vec<(PauliSum, f64)>,
    pub backend: LossBackend,
    /// Loss level below which a step counts as converged.
    pub convergence_threshold: f64,
    /// Loss at which the optimizer stops; defaults to the convergence
    /// threshold.
    pub target_loss: Option<f64>,
    pub shots: Option<u64>,
    pub max_iters: usize,
    pub gradient: GradientMethod,
    pub fd_step: f64,
    pub normalization: LossNormalization,
    /// Scale of the random kick applied when a step starts at a stationary
    /// point above the target loss.
    pub jitter: f64,
    /// Extra optimizer attempts per step (and random starts for the initial
    /// state fit).
    pub restarts: usize,
    pub seed: u64,
}

impl VqsConfig {
    pub fn new(hamiltonian: PauliSum, ansatz: AnsatzSpec, dt: f64, total_time: f64) -> Result<Self> {
        Ok(Self {
            hamiltonian,
            dt,
            total_time,
            ansatz,
            quadrature: build_quadrature(80.0, 1.0)?,
            penalty_coeff: 1.0,
            penalty_observables: Vec::new(),
            backend: LossBackend::DirectExpm,
            convergence_threshold: 1e-2,
            target_loss: None,
            shots: Some(20_000),
            max_iters: 200,
            gradient: GradientMethod::Auto,
            fd_step: 1e-6,
            normalization: LossNormalization::Normalized,
            jitter: 1e-2,
            restarts: 4,
            seed: 0,
        })
    }

    /// Number of time steps `T / dt`.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.total_time >= 0.0 && self.total_time.is_finite()) {
            return Err(Error::InvalidArgument(format!("total time {} must be non-negative", self.total_time)));
        }
        let ratio = self.total_time / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidArgument(format!("T / dt = {ratio} is not an integer")));
        }
        Ok(steps as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.n_steps()?;
        let n = self.ansatz.n_qubits;
        if self.hamiltonian.n_qubits() != n {
            return Err(Error::QubitCountMismatch { expected: n, found: self.hamiltonian.n_qubits() });
        }
        if !(self.penalty_coeff >= 0.0) {
            return Err(Error::InvalidArgument(format!("penalty coefficient {} must be >= 0", self.penalty_coeff)));
        }
        for (o, _) in &self.penalty_observables {
            if o.n_qubits() != n {
                return Err(Error::QubitCountMismatch { expected: n, found: o.n_qubits() });
            }
            o.require_hermitian()?;
        }
        if self.shots == Some(0) {
            return Err(Error::NoShots);
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
        }
        Ok(())
    }

    fn stop_loss(&self) -> f64 {
        self.target_loss.unwrap_or(self.convergence_threshold)
    }
}

/// A fidelity-loss value with its shot-noise standard error (zero for the
/// exact backends).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub std_error: f64,
}

/// Everything a step needs that does not depend on the trial parameters.
#[derive(Clone, Debug)]
pub struct StepTarget {
    pub theta_m: Vec<f64>,
    pub psi_m: StateVector,
    /// Target vector; the loss is `1 - |<psi(theta)|phi>|^2 / divisor`.
    phi: Vec<C64>,
    divisor: f64,
    /// Log of the norm gained by the exact (or quadrature) step.
    pub log_norm_increment: f64,
}

impl StepTarget {
    /// Fixed-state fidelity target, used for the initial fit.
    pub fn state(psi: &StateVector) -> Self {
        Self {
            theta_m: Vec::new(),
            psi_m: psi.clone(),
            phi: psi.amplitudes().to_vec(),
            divisor: psi.norm().powi(2),
            log_norm_increment: 0.0,
        }
    }
}

enum Backend {
    Direct(Propagator),
    Lchs(LchsPropagator),
    Sampled(SampledBackend),
}

struct SampledBackend {
    weights: Vec<f64>,
    /// Rewritten controlled `U_k` replacements, ancilla last.
    uk: Vec<Circuit>,
    /// `T_k(dt)` and `T_k(2 dt)` for the classical target.
    halves: Vec<(Circuit, Circuit)>,
    shift: f64,
}

/// Loss and gradient machinery for one configuration.
pub struct VqsEngine {
    config: VqsConfig,
    template: ParamCircuit,
    split: SplitHamiltonian,
    backend: Backend,
    /// Counter of sampled loss evaluations; each draws from its own stream.
    draws: AtomicU64,
}

/// Outcome of one optimized step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub theta: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VqsStep {
    pub m: usize,
    pub t: f64,
    pub theta: Vec<f64>,
    pub loss: f64,
    pub fidelity_loss: f64,
    pub penalty: f64,
    /// `<O_l>` for every penalty observable.
    pub penalty_values: Vec<f64>,
    pub observables: Vec<(String, f64)>,
    pub log_norm_increment: f64,
    pub log_norm_cumulative: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VqsTrace {
    pub steps: Vec<VqsStep>,
}

impl VqsTrace {
    pub fn all_converged(&self) -> bool {
        self.steps.iter().all(|s| s.converged)
    }

    /// Values of one observable over the steps.
    pub fn series(&self, name: &str) -> Vec<f64> {
        self.steps
            .iter()
            .filter_map(|s| s.observables.iter().find(|(n, _)| n == name).map(|(_, v)| *v))
            .collect()
    }
}

impl VqsEngine {
    pub fn new(config: VqsConfig) -> Result<Self> {
        config.validate()?;
        let template = config.ansatz.template();
        let split = hermitian_split(&config.hamiltonian);
        let backend = match config.backend {
            LossBackend::DirectExpm => {
                let h = match config.normalization {
                    LossNormalization::Normalized => config.hamiltonian.clone(),
                    LossNormalization::Raw => split.shifted_hamiltonian(),
                };
                Backend::Direct(Propagator::new(&h, config.dt)?)
            }
            LossBackend::LchsSum { mode } => Backend::Lchs(LchsPropagator::new(&split, &config.quadrature, mode)?),
            LossBackend::SampledCircuit => {
                let nodes = config.quadrature.nodes();
                let gens: Vec<PauliSum> = nodes.iter().map(|nd| node_generator(&split, nd.k)).collect();
                let uk = gens.iter().map(|g| simplify_uk_pass(g, config.dt)).collect::<Result<Vec<_>>>()?;
                let halves = gens
                    .iter()
                    .map(|g| Ok((trotter_circuit(g, config.dt)?, trotter_circuit(g, 2.0 * config.dt)?)))
                    .collect::<Result<Vec<_>>>()?;
                Backend::Sampled(SampledBackend {
                    weights: nodes.iter().map(|nd| nd.weight).collect(),
                    uk,
                    halves,
                    shift: split.shift(),
                })
            }
        };
        Ok(Self { config, template, split, backend, draws: AtomicU64::new(0) })
    }

    pub fn config(&self) -> &VqsConfig {
        &self.config
    }

    pub fn split(&self) -> &SplitHamiltonian {
        &self.split
    }

    pub fn template(&self) -> &ParamCircuit {
        &self.template
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        let p = self.config.ansatz.parameter_count();
        if theta.len() != p {
            return Err(Error::ParameterCount { expected: p, found: theta.len() });
        }
        Ok(())
    }

    /// `psi(theta) = U(theta)|0...0>`.
    pub fn ansatz_state(&self, theta: &[f64]) -> Result<StateVector> {
        let mut s = StateVector::zero(self.config.ansatz.n_qubits)?;
        self.template.bind(theta)?.apply(&mut s)?;
        Ok(s)
    }

    /// Target for the step leaving `theta_m`.
    pub fn step_target(&self, theta_m: &[f64]) -> Result<StepTarget> {
        self.check_theta(theta_m)?;
        let psi_m = self.ansatz_state(theta_m)?;
        let dt = self.config.dt;
        let raw = self.config.normalization == LossNormalization::Raw;
        let (phi, divisor, log_norm_increment) = match &self.backend {
            Backend::Direct(prop) => {
                let out = prop.apply_raw(&psi_m)?;
                let norm = out.norm();
                // The raw propagator is the shifted contraction.
                let ln = if raw { norm.ln() + self.split.shift() * dt } else { norm.ln() };
                (out.into_amplitudes(), if raw { 1.0 } else { norm * norm }, ln)
            }
            Backend::Lchs(prop) => {
                let out = prop.weighted_sum(dt, &psi_m)?;
                let norm = out.norm();
                let ln = norm.ln() - prop.weight_sum().ln() + prop.shift() * dt;
                (out.into_amplitudes(), if raw { 1.0 } else { norm * norm }, ln)
            }
            Backend::Sampled(sb) => {
                let states = par::map(&sb.halves, |(half, double)| -> Result<Vec<C64>> {
                    let mut s = psi_m.clone();
                    double.apply(&mut s)?;
                    half.inverse().apply(&mut s)?;
                    Ok(s.into_amplitudes())
                });
                let mut acc = vec![C64::new(0.0, 0.0); psi_m.dim()];
                for (w, s) in sb.weights.iter().zip(states) {
                    for (a, x) in acc.iter_mut().zip(s?) {
                        *a += x * *w;
                    }
                }
                let norm = dot(&acc, &acc).re.sqrt();
                let wsum: f64 = sb.weights.iter().sum();
                let ln = norm.ln() - wsum.ln() + sb.shift * dt;
                (acc, if raw { 1.0 } else { norm * norm }, ln)
            }
        };
        if !(divisor > 0.0 && log_norm_increment.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(StepTarget { theta_m: theta_m.to_vec(), psi_m, phi, divisor, log_norm_increment })
    }

    fn exact_fidelity(&self, psi: &StateVector, target: &StepTarget) -> f64 {
        1.0 - dot(psi.amplitudes(), &target.phi).norm_sqr() / target.divisor
    }

    /// Node-overlap estimate `S = sum_k c_k X_k` from the Hadamard tests and
    /// its standard errors `(re, im)`.
    fn sampled_sum(&self, sb: &SampledBackend, theta: &[f64], target: &StepTarget) -> Result<(C64, f64, f64)> {
        let n = self.config.ansatz.n_qubits;
        let pair = simplify_pair(&self.template.bind(theta)?, &self.template.bind(&target.theta_m)?)?;
        let mut bases = Vec::with_capacity(2);
        for imag in [false, true] {
            let mut s = StateVector::zero(n + 1)?;
            s.apply_gate(&Gate::h(n))?;
            if imag {
                s.apply_gate(&Gate::sdg(n))?;
            }
            pair.apply(&mut s)?;
            bases.push(s);
        }
        let probs = par::map(&sb.uk, |uk| -> Result<(f64, f64)> {
            let mut out = [0.0; 2];
            for (o, base) in out.iter_mut().zip(&bases) {
                let mut s = base.clone();
                uk.apply(&mut s)?;
                s.apply_gate(&Gate::h(n))?;
                *o = s.probability_zero(n)?;
            }
            Ok((out[0], out[1]))
        });
        let draw = self.draws.fetch_add(1, Ordering::Relaxed);
        let mut rng = SimRng::derived(self.config.seed ^ 0x5eed_5eed, draw);
        let mut sum = C64::new(0.0, 0.0);
        let (mut var_re, mut var_im) = (0.0, 0.0);
        for (w, p) in sb.weights.iter().zip(probs) {
            let (pr, pi) = p?;
            let (fr, fi) = match self.config.shots {
                Some(shots) => {
                    let s = shots as f64;
                    var_re += w * w * 4.0 * pr * (1.0 - pr) / s;
                    var_im += w * w * 4.0 * pi * (1.0 - pi) / s;
                    (rng.binomial(shots, pr) as f64 / s, rng.binomial(shots, pi) as f64 / s)
                }
                None => (pr, pi),
            };
            sum += C64::new(2.0 * fr - 1.0, 2.0 * fi - 1.0) * *w;
        }
        Ok((sum, var_re.sqrt(), var_im.sqrt()))
    }

    pub fn fidelity_loss_value(&self, theta: &[f64], target: &StepTarget) -> Result<LossValue> {
        self.check_theta(theta)?;
        match &self.backend {
            Backend::Sampled(sb) if !target.theta_m.is_empty() => {
                let (s, se_re, se_im) = self.sampled_sum(sb, theta, target)?;
                let value = 1.0 - s.norm_sqr() / target.divisor;
                let std_error = 2.0 / target.divisor * ((s.re * se_re).powi(2) + (s.im * se_im).powi(2)).sqrt();
                Ok(LossValue { value, std_error })
            }
            _ => {
                let psi = self.ansatz_state(theta)?;
                Ok(LossValue { value: self.exact_fidelity(&psi, target), std_error: 0.0 })
            }
        }
    }

    /// Expectations `<O_l>` of the penalty observables.
    pub fn penalty_values(&self, psi: &StateVector) -> Vec<f64> {
        self.config.penalty_observables.iter().map(|(o, _)| expectation_unchecked(psi.amplitudes(), o)).collect()
    }

    fn penalty_of(&self, values: &[f64]) -> f64 {
        if self.config.penalty_coeff == 0.0 {
            return 0.0;
        }
        let sq: f64 = values.iter().zip(&self.config.penalty_observables).map(|(v, (_, t))| (v - t) * (v - t)).sum();
        self.config.penalty_coeff * sq
    }

    pub fn penalty_loss(&self, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        if self.config.penalty_coeff == 0.0 || self.config.penalty_observables.is_empty() {
            return Ok(0.0);
        }
        Ok(self.penalty_of(&self.penalty_values(&self.ansatz_state(theta)?)))
    }

    pub fn total_loss(&self, theta: &[f64], target: &StepTarget) -> Result<f64> {
        Ok(self.fidelity_loss_value(theta, target)?.value + self.penalty_loss(theta)?)
    }

    fn resolved_gradient(&self) -> GradientMethod {
        match (self.config.gradient, &self.backend) {
            (GradientMethod::Auto, Backend::Sampled(_)) => GradientMethod::ParameterShift,
            (GradientMethod::Auto, _) => GradientMethod::FiniteDifference,
            (m, _) => m,
        }
    }

    pub fn gradient(&self, theta: &[f64], target: &StepTarget) -> Result<Vec<f64>> {
        self.gradient_with(self.resolved_gradient(), theta, target, true)
    }

    pub fn gradient_with(
        &self,
        method: GradientMethod,
        theta: &[f64],
        target: &StepTarget,
        with_penalty: bool,
    ) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let loss = |th: &[f64]| -> Result<f64> {
            let f = self.fidelity_loss_value(th, target)?.value;
            Ok(if with_penalty { f + self.penalty_loss(th)? } else { f })
        };
        match method {
            GradientMethod::Auto => self.gradient_with(self.resolved_gradient(), theta, target, with_penalty),
            GradientMethod::FiniteDifference => {
                let h = self.config.fd_step;
                let idx: Vec<usize> = (0..theta.len()).collect();
                let one = |&j: &usize| -> Result<f64> {
                    let mut tp = theta.to_vec();
                    let mut tm = theta.to_vec();
                    tp[j] += h;
                    tm[j] -= h;
                    Ok((loss(&tp)? - loss(&tm)?) / (2.0 * h))
                };
                // Sampled losses draw in call order, so keep that order fixed.
                let g = match self.backend {
                    Backend::Sampled(_) => idx.iter().map(one).collect(),
                    _ => par::map(&idx, one),
                };
                g.into_iter().collect()
            }
            GradientMethod::ParameterShift => {
                let pen = with_penalty && self.config.penalty_coeff != 0.0 && !self.config.penalty_observables.is_empty();
                let base = if pen { self.penalty_values(&self.ansatz_state(theta)?) } else { Vec::new() };
                let mut g = Vec::with_capacity(theta.len());
                for j in 0..theta.len() {
                    let mut tp = theta.to_vec();
                    let mut tm = theta.to_vec();
                    tp[j] += FRAC_PI_2;
                    tm[j] -= FRAC_PI_2;
                    let mut d = 0.5
                        * (self.fidelity_loss_value(&tp, target)?.value - self.fidelity_loss_value(&tm, target)?.value);
                    if pen {
                        let vp = self.penalty_values(&self.ansatz_state(&tp)?);
                        let vm = self.penalty_values(&self.ansatz_state(&tm)?);
                        for (l, (_, tar)) in self.config.penalty_observables.iter().enumerate() {
                            let dobs = 0.5 * (vp[l] - vm[l]);
                            d += 2.0 * self.config.penalty_coeff * (base[l] - tar) * dobs;
                        }
                    }
                    g.push(d);
                }
                Ok(g)
            }
            GradientMethod::Adjoint => self.adjoint_gradient(theta, target, with_penalty),
        }
    }

    /// Reverse sweep: with `lambda_j = (U_L ... U_{j+1})^dagger lambda` and
    /// `chi_j = U_j ... U_1 |0>`, a rotation `exp(-i a f P)` contributes
    /// `-i f <lambda_j|P|chi_j>` to `d<lambda|psi>/da`.
    fn adjoint_gradient(&self, theta: &[f64], target: &StepTarget, with_penalty: bool) -> Result<Vec<f64>> {
        let circuit = self.template.bind(theta)?;
        let psi = {
            let mut s = StateVector::zero(circuit.n_qubits())?;
            circuit.apply(&mut s)?;
            s
        };
        let overlap = dot(&target.phi, psi.amplitudes());
        // dF/da = -2 Re(conj(s) ds/da) / divisor with s = <phi|psi>.
        let mut seeds: Vec<(Vec<C64>, Box<dyn Fn(C64) -> f64 + '_>)> = Vec::new();
        let div = target.divisor;
        seeds.push((target.phi.clone(), Box::new(move |ds: C64| -2.0 * (overlap.conj() * ds).re / div)));
        if with_penalty && self.config.penalty_coeff != 0.0 {
            let values = self.penalty_values(&psi);
            for ((o, tar), v) in self.config.penalty_observables.iter().zip(values) {
                let lam = o.apply(psi.amplitudes());
                let coef = 2.0 * self.config.penalty_coeff * (v - tar);
                // d<O>/da = 2 Re(<O psi| d psi>).
                seeds.push((lam, Box::new(move |ds: C64| coef * 2.0 * ds.re)));
            }
        }
        let slot_of = {
            let mut m = vec![usize::MAX; circuit.len()];
            for (j, &s) in self.template.slots().iter().enumerate() {
                m[s] = j;
            }
            m
        };
        let n = circuit.n_qubits();
        let mut grad = vec![0.0; theta.len()];
        for (lam0, map) in seeds {
            let mut chi = psi.amplitudes().to_vec();
            let mut lam = lam0;
            for (i, g) in circuit.gates().iter().enumerate().rev() {
                let j = slot_of[i];
                if j != usize::MAX {
                    let (p, f) = g.kind.generator().ok_or_else(|| Error::InvalidArgument("non-rotation parameter".into()))?;
                    let mut pchi = chi.clone();
                    let (mask, value) = g.control_condition(n);
                    apply_single(&mut pchi, &pauli_matrix(p), n - 1 - g.target, mask, value);
                    let ds = C64::new(0.0, -f) * dot(&lam, &pchi);
                    grad[j] += map(ds);
                }
                let inv = g.inverse();
                let (mask, value) = inv.control_condition(n);
                let m = inv.matrix();
                apply_single(&mut chi, &m, n - 1 - inv.target, mask, value);
                apply_single(&mut lam, &m, n - 1 - inv.target, mask, value);
            }
        }
        Ok(grad)
    }

    /// BFGS from `theta_init`, kicking the start by `jitter` when it sits on
    /// a stationary point above the stop loss and restarting from the best
    /// point when an attempt ends above the convergence threshold.
    pub fn optimize_step(&self, theta_init: &[f64], target: &StepTarget) -> Result<StepOutcome> {
        self.check_theta(theta_init)?;
        let cfg = &self.config;
        let opts = BfgsOptions { max_iters: cfg.max_iters, target: cfg.stop_loss(), ..Default::default() };
        let f = |th: &[f64]| self.total_loss(th, target);
        let g = |th: &[f64]| self.gradient(th, target);
        let mut kick = SimRng::derived(cfg.seed, 2 + target.theta_m.len() as u64);
        let mut start = theta_init.to_vec();
        let mut best: Option<StepOutcome> = None;
        let mut total_iters = 0;
        let mut history = Vec::new();
        for attempt in 0..=cfg.restarts {
            let r = minimize(f, g, &start, &opts)?;
            total_iters += r.iterations;
            history.extend_from_slice(&r.history);
            let improved = best.as_ref().is_none_or(|b| r.f < b.loss);
            if improved {
                best = Some(StepOutcome {
                    theta: r.x.clone(),
                    loss: r.f,
                    iterations: 0,
                    converged: false,
                    history: Vec::new(),
                });
            }
            let best_loss = best.as_ref().map_or(f64::INFINITY, |b| b.loss);
            let stalled_at_start = r.iterations == 0 && r.f >= opts.target;
            if best_loss < opts.target || (!stalled_at_start && best_loss <= cfg.convergence_threshold) {
                break;
            }
            if attempt == cfg.restarts || cfg.jitter == 0.0 {
                break;
            }
            let from = &best.as_ref().expect("set above").theta;
            start = from.iter().map(|x| x + cfg.jitter * kick.normal()).collect();
        }
        let mut out = best.expect("at least one attempt");
        out.iterations = total_iters;
        out.converged = out.loss <= cfg.convergence_threshold;
        out.history = history;
        Ok(out)
    }

    /// Parameters preparing `psi0`: analytic for computational basis states,
    /// otherwise a fidelity fit from random starts.
    pub fn init_theta0(&self, psi0: &StateVector) -> Result<(Vec<f64>, f64)> {
        let spec = self.config.ansatz;
        if psi0.n_qubits() != spec.n_qubits {
            return Err(Error::QubitCountMismatch { expected: spec.n_qubits, found: psi0.n_qubits() });
        }
        psi0.require_normalized()?;
        let target = StepTarget::state(psi0);
        if let (Some(idx), true) = (psi0.as_basis_index(1e-12), spec.layers > 0) {
            let mut theta = vec![0.0; spec.parameter_count()];
            for q in 0..spec.n_qubits {
                if idx >> (spec.n_qubits - 1 - q) & 1 == 1 {
                    theta[spec.parameter_index(0, q, 0)] = core::f64::consts::PI;
                }
            }
            let residual = self.exact_fidelity(&self.ansatz_state(&theta)?, &target);
            return Ok((theta, residual.max(0.0)));
        }
        let cfg = &self.config;
        let opts = BfgsOptions { max_iters: cfg.max_iters.max(500), target: cfg.stop_loss(), ..Default::default() };
        let method = match self.resolved_gradient() {
            GradientMethod::ParameterShift => GradientMethod::Adjoint,
            m => m,
        };
        let f = |th: &[f64]| Ok(self.exact_fidelity(&self.ansatz_state(th)?, &target));
        let g = |th: &[f64]| self.gradient_with(method, th, &target, false);
        let mut rng = SimRng::derived(cfg.seed, 0);
        let mut best: Option<(Vec<f64>, f64)> = None;
        for _ in 0..=cfg.restarts {
            let start: Vec<f64> = (0..spec.parameter_count()).map(|_| (2.0 * rng.uniform() - 1.0) * core::f64::consts::PI).collect();
            let r = minimize(f, g, &start, &opts)?;
            if best.as_ref().is_none_or(|b| r.f < b.1) {
                best = Some((r.x, r.f));
            }
            if best.as_ref().is_some_and(|b| b.1 <= opts.target) {
                break;
            }
        }
        let (theta, residual) = best.expect("at least one start");
        if residual > cfg.convergence_threshold {
            return Err(Error::Optimizer(format!(
                "initial state fit stalled at infidelity {residual:.3e} (threshold {:.1e})",
                cfg.convergence_threshold
            )));
        }
        Ok((theta, residual))
    }

    fn record(
        &self,
        m: usize,
        theta: Vec<f64>,
        loss: f64,
        fidelity_loss: f64,
        log: (f64, f64),
        iterations: usize,
        converged: bool,
        observables: &[ObservableSpec],
    ) -> Result<VqsStep> {
        let psi = self.ansatz_state(&theta)?;
        let penalty_values = self.penalty_values(&psi);
        let penalty = self.penalty_of(&penalty_values);
        let observables =
            observables.iter().map(|o| Ok((o.name.clone(), o.observable.evaluate(&psi)?))).collect::<Result<Vec<_>>>()?;
        Ok(VqsStep {
            m,
            t: m as f64 * self.config.dt,
            theta,
            loss,
            fidelity_loss,
            penalty,
            penalty_values,
            observables,
            log_norm_increment: log.0,
            log_norm_cumulative: log.1,
            iterations,
            converged,
        })
    }

    /// Fits `theta_0` and then takes `T / dt` optimized steps, recording the
    /// observables on each new ansatz state.
    pub fn run_evolution(&self, psi0: &StateVector, observables: &[ObservableSpec]) -> Result<VqsTrace> {
        let (theta0, residual) = self.init_theta0(psi0)?;
        let mut steps = Vec::with_capacity(self.config.n_steps()? + 1);
        steps.push(self.record(0, theta0, residual, residual, (0.0, 0.0), 0, true, observables)?);
        let mut cumulative = 0.0;
        for m in 0..self.config.n_steps()? {
            let theta_m = steps.last().expect("non-empty").theta.clone();
            let target = self.step_target(&theta_m)?;
            let out = self.optimize_step(&theta_m, &target)?;
            cumulative += target.log_norm_increment;
            let fid = self.fidelity_loss_value(&out.theta, &target)?.value;
            steps.push(self.record(
                m + 1,
                out.theta,
                out.loss,
                fid,
                (target.log_norm_increment, cumulative),
                out.iterations,
                out.converged,
                observables,
            )?);
        }
        Ok(VqsTrace { steps })
    }
}

fn pauli_matrix(p: Pauli) -> [[C64; 2]; 2] {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match p {
        Pauli::I => [[one, z], [z, one]],
        Pauli::X => [[z, one], [one, z]],
        Pauli::Y => [[z, -i], [i, z]],
        Pauli::Z => [[one, z], [z, -one]],
    }
}

pub fn init_theta0(config: &VqsConfig, psi0: &StateVector) -> Result<Vec<f64>> {
    Ok(VqsEngine::new(config.clone())?.init_theta0(psi0)?.0)
}

pub fn fidelity_loss(theta: &[f64], theta_m: &[f64], config: &VqsConfig) -> Result<LossValue> {
    let e = VqsEngine::new(config.clone())?;
    let target = e.step_target(theta_m)?;
    e.fidelity_loss_value(theta, &target)
}

pub fn penalty_loss(theta: &[f64], config: &VqsConfig) -> Result<f64> {
    VqsEngine::new(config.clone())?.penalty_loss(theta)
}

pub fn total_loss(theta: &[f64], theta_m: &[f64], config: &VqsConfig) -> Result<f64> {
    let e = VqsEngine::new(config.clone())?;
    let target = e.step_target(theta_m)?;
    e.total_loss(theta, &target)
}

pub fn gradient(theta: &[f64], theta_m: &[f64], config: &VqsConfig) -> Result<Vec<f64>> {
    let e = VqsEngine::new(config.clone())?;
    let target = e.step_target(theta_m)?;
    e.gradient(theta, &target)
}

pub fn optimize_step(theta_init: &[f64], theta_m: &[f64], config: &VqsConfig) -> Result<StepOutcome> {
    let e = VqsEngine::new(config.clone())?;
    let target = e.step_target(theta_m)?;
    e.optimize_step(theta_init, &target)
}

pub fn run_evolution(config: &VqsConfig, psi0: &StateVector, observables: &[ObservableSpec]) -> Result<VqsTrace> {
    VqsEngine::new(config.clone())?.run_evolution(psi0, observables)
}

/// Shot statistics of a diagonal observable measured on one ansatz state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReplayPoint {
    pub t: f64,
    /// Noiseless expectation on the ansatz state.
    pub reference: f64,
    pub mean: f64,
    /// Sample standard deviation over repetitions.
    pub std: f64,
    /// Repetition closest to the reference.
    pub min_bias: f64,
}

/// Optional readout noise applied before estimation, with the calibration
/// used to undo it.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayNoise {
    pub model: ReadoutNoiseModel,
    pub calibration: CalibrationMatrix,
}

/// Re-measures a diagonal observable on every recorded ansatz state with
/// `reps` independent runs of `shots` shots each.
pub fn sampled_replay(
    trace: &VqsTrace,
    spec: AnsatzSpec,
    observable: &PauliSum,
    shots: u64,
    reps: usize,
    seed: u64,
    noise: Option<&ReplayNoise>,
) -> Result<Vec<ReplayPoint>> {
    if shots == 0 || reps == 0 {
        return Err(Error::NoShots);
    }
    let diag = diagonal_of(observable)?;
    let template = spec.template();
    let mut out = Vec::with_capacity(trace.steps.len());
    for (si, step) in trace.steps.iter().enumerate() {
        let mut psi = StateVector::zero(spec.n_qubits)?;
        template.bind(&step.theta)?.apply(&mut psi)?;
        let reference: f64 = psi.probabilities().iter().zip(&diag).map(|(p, o)| p * o).sum();
        let mut values = Vec::with_capacity(reps);
        for r in 0..reps {
            let run_seed = seed ^ ((si as u64) << 32 | r as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let counts = sample_counts(&psi, shots, run_seed)?;
            let v = match noise {
                Some(nz) => {
                    let noisy = apply_readout_noise(&counts, &nz.model, run_seed.rotate_left(17))?;
                    mitigate(&noisy, &nz.calibration)?.expectation(observable)?
                }
                None => counts.frequencies().iter().zip(&diag).map(|(p, o)| p * o).sum(),
            };
            values.push(v);
        }
        let mean = values.iter().sum::<f64>() / reps as f64;
        let var = if reps > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64 } else { 0.0 };
        let min_bias = values
            .iter()
            .copied()
            .min_by(|a, b| (a - reference).abs().partial_cmp(&(b - reference).abs()).expect("finite"))
            .expect("reps > 0");
        out.push(ReplayPoint { t: step.t, reference, mean, std: var.sqrt(), min_bias });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{hn_initial_state, particle_number, HatanoNelsonSpec};
    use crate::statevec::{exact_evolve, inner_product};
    use core::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn rand_theta(p: usize, seed: u64) -> Vec<f64> {
        let mut r = SimRng::new(seed);
        (0..p).map(|_| (2.0 * r.uniform() - 1.0) * PI).collect()
    }

    fn toy(h: PauliSum, layers: usize) -> VqsConfig {
        let n = h.n_qubits();
        VqsConfig::new(h, AnsatzSpec::new(n, layers), 0.1, 0.3).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut cfg = toy(PauliSum::zero(2).unwrap(), 1);
        cfg.total_time = 0.25;
        assert!(cfg.validate().is_err());
        cfg.total_time = 0.0;
        assert_eq!(cfg.n_steps().unwrap(), 0);
        cfg.penalty_observables.push((PauliSum::from_strs(2, &[(c(0.0, 1.0), "ZZ")]).unwrap(), 0.0));
        assert!(matches!(cfg.validate(), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn zero_state_needs_zero_angles() {
        let cfg = toy(PauliSum::zero(6).unwrap(), 5);
        let (theta, res) = VqsEngine::new(cfg).unwrap().init_theta0(&StateVector::zero(6).unwrap()).unwrap();
        assert!(theta.iter().all(|&x| x == 0.0));
        assert!(res < 1e-15);
    }

    #[test]
    fn basis_state_is_prepared_analytically() {
        let cfg = toy(PauliSum::zero(10).unwrap(), 5);
        let e = VqsEngine::new(cfg).unwrap();
        let psi0 = crate::statevec::basis_state(10, "0000110000").unwrap();
        let (theta, res) = e.init_theta0(&psi0).unwrap();
        assert!(res <= 1e-10);
        let nonzero: Vec<usize> = (0..theta.len()).filter(|&i| theta[i] != 0.0).collect();
        assert_eq!(nonzero, [12, 15]);
    }

    #[test]
    fn random_state_fit() {
        let cfg = toy(PauliSum::zero(2).unwrap(), 5);
        let e = VqsEngine::new(cfg).unwrap();
        let psi0 = StateVector::random(2, 4).unwrap();
        let (theta, res) = e.init_theta0(&psi0).unwrap();
        assert!(res <= 1e-2);
        let direct = 1.0 - e.ansatz_state(&theta).unwrap().fidelity(&psi0).unwrap();
        assert!((direct - res).abs() < 1e-12);
    }

    #[test]
    fn hermitian_exact_step_has_zero_loss() {
        let h = PauliSum::from_strs(1, &[(c(0.7, 0.0), "X")]).unwrap();
        let cfg = toy(h.clone(), 1);
        let e = VqsEngine::new(cfg).unwrap();
        let theta_m = [0.3, 0.2, -0.1];
        // exp(-i 0.7 X dt) = Rx(1.4 dt): fold it into the last Rx.
        let theta = [0.3, 0.2, -0.1 + 1.4 * 0.1];
        let target = e.step_target(&theta_m).unwrap();
        assert!(e.fidelity_loss_value(&theta, &target).unwrap().value.abs() < 1e-14);
        assert!(target.log_norm_increment.abs() < 1e-14);
    }

    #[test]
    fn zero_hamiltonian_raw_lchs_loss() {
        let mut cfg = toy(PauliSum::zero(2).unwrap(), 1);
        cfg.backend = LossBackend::LchsSum { mode: NodeMode::Exact };
        cfg.normalization = LossNormalization::Raw;
        let e = VqsEngine::new(cfg.clone()).unwrap();
        let (th, thm) = (rand_theta(6, 1), rand_theta(6, 2));
        let target = e.step_target(&thm).unwrap();
        let wsum = cfg.quadrature.weight_sum();
        let ov = inner_product(&e.ansatz_state(&th).unwrap(), &e.ansatz_state(&thm).unwrap()).unwrap().norm_sqr();
        let got = e.fidelity_loss_value(&th, &target).unwrap().value;
        assert!((got - (1.0 - wsum * wsum * ov)).abs() < 1e-12);
        let at_min = e.fidelity_loss_value(&thm, &target).unwrap().value;
        assert!((at_min - (1.0 - wsum * wsum)).abs() < 1e-12);
        assert!(e.gradient(&thm, &target).unwrap().iter().all(|g| g.abs() < 1e-6));
    }

    #[test]
    fn warm_start_at_zero_hamiltonian() {
        let cfg = toy(PauliSum::zero(2).unwrap(), 2);
        let theta_m = rand_theta(12, 3);
        let out = optimize_step(&theta_m, &theta_m, &cfg).unwrap();
        assert!(out.iterations <= 1 && out.loss < 1e-12 && out.converged);
    }

    #[test]
    fn penalty_examples() {
        let n = 10;
        let mut cfg = toy(PauliSum::zero(n).unwrap(), 1);
        cfg.penalty_observables.push((particle_number(n).unwrap(), 2.0));
        let e = VqsEngine::new(cfg.clone()).unwrap();
        assert!((e.penalty_loss(&vec![0.0; 30]).unwrap() - 4.0).abs() < 1e-12);
        let (theta, _) = e.init_theta0(&hn_initial_state(&HatanoNelsonSpec::new(n, 1.0, 1.0, false)).unwrap()).unwrap();
        assert!(e.penalty_loss(&theta).unwrap() < 1e-20);
        cfg.penalty_coeff = 0.0;
        assert_eq!(penalty_loss(&vec![0.0; 30], &cfg).unwrap(), 0.0);
    }

    #[test]
    fn total_is_sum_of_parts() {
        let h = PauliSum::from_strs(2, &[(c(0.5, 0.3), "XZ"), (c(-0.2, 0.0), "YY")]).unwrap();
        let mut cfg = toy(h, 1);
        cfg.penalty_observables.push((PauliSum::from_strs(2, &[(c(1.0, 0.0), "ZI")]).unwrap(), 0.3));
        let (th, thm) = (rand_theta(6, 5), rand_theta(6, 6));
        let tot = total_loss(&th, &thm, &cfg).unwrap();
        let sum = fidelity_loss(&th, &thm, &cfg).unwrap().value + penalty_loss(&th, &cfg).unwrap();
        assert!((tot - sum).abs() < 1e-14);
    }

    #[test]
    fn single_parameter_gradient_matches_closed_form() {
        // One qubit, H = 0: psi(theta) = Rx(c) Rz(b) Rx(a)|0>; with b = c = 0
        // and theta_m = 0 the loss is sin^2(a/2), slope sin(a)/2.
        let cfg = toy(PauliSum::zero(1).unwrap(), 1);
        let e = VqsEngine::new(cfg).unwrap();
        let target = e.step_target(&[0.0; 3]).unwrap();
        for a in [0.3, 1.1, -2.0] {
            let g = e.gradient(&[a, 0.0, 0.0], &target).unwrap();
            assert!((g[0] - a.sin() / 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn gradient_methods_agree() {
        let h = PauliSum::from_strs(2, &[(c(0.6, 0.2), "XY"), (c(0.3, -0.4), "ZI"), (c(0.1, 0.0), "IX")]).unwrap();
        let mut cfg = toy(h, 2);
        cfg.penalty_observables.push((PauliSum::from_strs(2, &[(c(1.0, 0.0), "ZZ")]).unwrap(), 0.2));
        let e = VqsEngine::new(cfg).unwrap();
        let target = e.step_target(&rand_theta(12, 7)).unwrap();
        let th = rand_theta(12, 8);
        let fd = e.gradient_with(GradientMethod::FiniteDifference, &th, &target, true).unwrap();
        for m in [GradientMethod::ParameterShift, GradientMethod::Adjoint] {
            let other = e.gradient_with(m, &th, &target, true).unwrap();
            for (a, b) in fd.iter().zip(&other) {
                assert!((a - b).abs() < 1e-7, "{m:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn sampled_backend_noiseless_limit_matches_effective_target() {
        let h = PauliSum::from_strs(2, &[(c(0.6, 0.2), "XY"), (c(0.3, -0.4), "ZI")]).unwrap();
        let mut cfg = toy(h, 1);
        cfg.quadrature = build_quadrature(4.0, 1.0).unwrap();
        cfg.backend = LossBackend::SampledCircuit;
        cfg.shots = None;
        let e = VqsEngine::new(cfg).unwrap();
        let (th, thm) = (rand_theta(6, 9), rand_theta(6, 10));
        let target = e.step_target(&thm).unwrap();
        let sampled = e.fidelity_loss_value(&th, &target).unwrap();
        // The same target through the exact overlap path.
        let exact = e.exact_fidelity(&e.ansatz_state(&th).unwrap(), &target);
        assert!((sampled.value - exact).abs() < 1e-12);
        assert_eq!(sampled.std_error, 0.0);
    }

    #[test]
    fn sampled_loss_reports_standard_error() {
        let h = PauliSum::from_strs(1, &[(c(0.6, 0.2), "X"), (c(0.3, 0.0), "Z")]).unwrap();
        let mut cfg = toy(h, 1);
        cfg.quadrature = build_quadrature(4.0, 1.0).unwrap();
        cfg.backend = LossBackend::SampledCircuit;
        cfg.shots = Some(20_000);
        let e = VqsEngine::new(cfg).unwrap();
        let (th, thm) = (rand_theta(3, 11), rand_theta(3, 12));
        let target = e.step_target(&thm).unwrap();
        let noisy = e.fidelity_loss_value(&th, &target).unwrap();
        let exact = e.exact_fidelity(&e.ansatz_state(&th).unwrap(), &target);
        assert!(noisy.std_error > 0.0);
        assert!((noisy.value - exact).abs() < 6.0 * noisy.std_error + 1e-4);
    }

    #[test]
    fn hermitian_toy_reaches_target_state() {
        let h = PauliSum::from_strs(2, &[(c(1.0, 0.0), "XX"), (c(0.5, 0.0), "ZI")]).unwrap();
        let mut cfg = toy(h.clone(), 3);
        cfg.target_loss = Some(1e-10);
        let e = VqsEngine::new(cfg).unwrap();
        let thm = rand_theta(18, 13);
        let target = e.step_target(&thm).unwrap();
        let out = e.optimize_step(&rand_theta(18, 14), &target).unwrap();
        let want = exact_evolve(&h, 0.1, &e.ansatz_state(&thm).unwrap()).unwrap().state;
        assert!(e.ansatz_state(&out.theta).unwrap().fidelity(&want).unwrap() >= 0.99);
    }

    #[test]
    fn zero_duration_run_has_only_initial_point() {
        let mut cfg = toy(PauliSum::zero(2).unwrap(), 1);
        cfg.total_time = 0.0;
        let trace = run_evolution(&cfg, &StateVector::zero(2).unwrap(), &[]).unwrap();
        assert_eq!(trace.steps.len(), 1);
    }

    #[test]
    fn replay_statistics() {
        let mut cfg = toy(PauliSum::from_strs(1, &[(c(1.0, 0.0), "X")]).unwrap(), 1);
        cfg.target_loss = Some(1e-10);
        let trace = run_evolution(&cfg, &StateVector::zero(1).unwrap(), &[]).unwrap();
        let z = PauliSum::from_strs(1, &[(c(1.0, 0.0), "Z")]).unwrap();
        let pts = sampled_replay(&trace, cfg.ansatz, &z, 2000, 20, 1, None).unwrap();
        assert_eq!(pts.len(), 4);
        for p in &pts {
            assert!((p.mean - p.reference).abs() < 5.0 * p.std / (20f64).sqrt() + 1e-12);
            assert!((p.min_bias - p.reference).abs() <= (p.mean - p.reference).abs() + 3.0 * p.std);
        }
        let again = sampled_replay(&trace, cfg.ansatz, &z, 2000, 20, 1, None).unwrap();
        assert_eq!(pts, again);
    }
}
