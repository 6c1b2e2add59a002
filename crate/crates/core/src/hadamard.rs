//! Hadamard-test overlap circuits and the controlled-pair rewrite.
//!
//! Every test circuit acts on `n + 1` qubits: the system register keeps
//! indices `0..n` and the ancilla is qubit `n`. The ancilla starts in
//! `|+>`; branch 0 carries `|a>` and branch 1 carries `|b>`, and after the
//! closing Hadamard `P(0) = (1 + Re <a|b>) / 2`. The imaginary-part circuit
//! inserts `S^dagger` right after the opening Hadamard, which turns this into
//! `(1 + Im <a|b>) / 2`.

use crate::circuit::{build_hea, push_controlled_phase, trotter_circuit, AnsatzSpec, Circuit, Control, Gate};
use crate::pauli::PauliSum;
use crate::prelude::*;
use crate::rng::SimRng;
use crate::statevec::StateVector;
use crate::{Error, Result};

/// Controlled rotations with a smaller angle are dropped by the rewrite.
pub const DROP_ANGLE: f64 = 1e-12;

/// The two circuits measuring `Re X` and `Im X`.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapCircuitPair {
    pub real_part: Circuit,
    pub imag_part: Circuit,
    pub ancilla_index: usize,
}

impl OverlapCircuitPair {
    /// Wraps a controlled body (acting on `n + 1` qubits) with the ancilla
    /// preparation and readout gates.
    pub fn from_body(body: &Circuit, ancilla: usize) -> Result<Self> {
        let n = body.n_qubits();
        let wrap = |imag: bool| -> Result<Circuit> {
            let mut c = Circuit::new(n);
            c.push(Gate::h(ancilla))?;
            if imag {
                c.push(Gate::sdg(ancilla))?;
            }
            c.append(body)?;
            c.push(Gate::h(ancilla))?;
            Ok(c)
        };
        Ok(Self { real_part: wrap(false)?, imag_part: wrap(true)?, ancilla_index: ancilla })
    }

    /// Exact ancilla `P(0)` of both circuits from the all-zero input.
    pub fn probabilities(&self) -> Result<(f64, f64)> {
        Ok((ancilla_p0(&self.real_part, self.ancilla_index)?, ancilla_p0(&self.imag_part, self.ancilla_index)?))
    }

    /// Noiseless overlap.
    pub fn overlap(&self) -> Result<C64> {
        let (pr, pi) = self.probabilities()?;
        overlap_from_probabilities(pr, pi)
    }

    /// Overlap estimated from `shots` ancilla readouts per circuit.
    pub fn sampled_overlap(&self, shots: u64, rng: &mut SimRng) -> Result<C64> {
        if shots == 0 {
            return Err(Error::NoShots);
        }
        let (pr, pi) = self.probabilities()?;
        let fr = rng.binomial(shots, pr) as f64 / shots as f64;
        let fi = rng.binomial(shots, pi) as f64 / shots as f64;
        overlap_from_probabilities(fr, fi)
    }
}

/// Probability of reading 0 on `ancilla` after running `circuit` on
/// `|0...0>`.
pub fn ancilla_p0(circuit: &Circuit, ancilla: usize) -> Result<f64> {
    let mut s = StateVector::zero(circuit.n_qubits())?;
    circuit.apply(&mut s)?;
    Ok(s.probability_zero(ancilla)?.clamp(0.0, 1.0))
}

/// `X = (2 p_re - 1) + i (2 p_im - 1)`.
pub fn overlap_from_probabilities(p0_real: f64, p0_imag: f64) -> Result<C64> {
    for p in [p0_real, p0_imag] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
    }
    Ok(C64::new(2.0 * p0_real - 1.0, 2.0 * p0_imag - 1.0))
}

fn check_theta(spec: AnsatzSpec, theta: &[f64]) -> Result<()> {
    if theta.len() != spec.parameter_count() {
        return Err(Error::ParameterCount { expected: spec.parameter_count(), found: theta.len() });
    }
    Ok(())
}

/// Unsimplified test for `X = <psi(theta)| uk |psi(theta_m)>`: 0-controlled
/// `U(theta)`, 1-controlled `U(theta_m)`, then 1-controlled `uk_block`.
pub fn build_reference_test(
    theta: &[f64],
    theta_m: &[f64],
    uk_block: &Circuit,
    spec: AnsatzSpec,
) -> Result<OverlapCircuitPair> {
    check_theta(spec, theta)?;
    check_theta(spec, theta_m)?;
    let n = spec.n_qubits;
    if uk_block.n_qubits() != n {
        return Err(Error::QubitCountMismatch { expected: n, found: uk_block.n_qubits() });
    }
    let total = n + 1;
    let mut body = build_hea(spec, theta)?.embed(total, 0)?.add_control(n, false)?;
    body.append(&build_hea(spec, theta_m)?.embed(total, 0)?.add_control(n, true)?)?;
    body.append(&uk_block.embed(total, 0)?.add_control(n, true)?)?;
    OverlapCircuitPair::from_body(&body, n)
}

/// Reference interleaving `prod_i [C1 b_i . C0 a_i]` of two circuits with a
/// shared gate structure, on the register extended by the ancilla `n`.
pub fn pair_product(a: &Circuit, b: &Circuit) -> Result<Circuit> {
    let n = a.n_qubits();
    if b.n_qubits() != n {
        return Err(Error::QubitCountMismatch { expected: n, found: b.n_qubits() });
    }
    if a.len() != b.len() {
        return Err(Error::StructureMismatch {
            index: a.len().min(b.len()),
            reason: format!("gate counts differ ({} vs {})", a.len(), b.len()),
        });
    }
    let mut out = Circuit::new(n + 1);
    for (ga, gb) in a.gates().iter().zip(b.gates()) {
        out.push(ga.clone().controlled(n, false))?;
        out.push(gb.clone().controlled(n, true))?;
    }
    push_controlled_phase(&mut out, n, false, a.global_phase);
    push_controlled_phase(&mut out, n, true, b.global_phase);
    Ok(out)
}

/// Splits a gate's controls into the ancilla control (if any) and the rest.
fn ancilla_control(g: &Gate, ancilla: usize) -> (Option<bool>, Vec<Control>) {
    let mut pol = None;
    let mut rest = Vec::new();
    for c in &g.controls {
        if c.qubit == ancilla {
            pol = Some(c.polarity);
        } else {
            rest.push(*c);
        }
    }
    (pol, rest)
}

/// Rewrites every aligned `C0[g(a)] . C1[g(b)]` pair: a parameterized gate
/// becomes `g(a)` followed by `C1 g(b - a)` (dropped when `b - a` is below
/// [`DROP_ANGLE`]), a fixed gate becomes a single uncontrolled copy. Gates
/// not controlled by the ancilla pass through. The pair members may appear
/// in either order since they commute.
pub fn simplify_pair_pass(product: &Circuit, ancilla: usize) -> Result<Circuit> {
    let n = product.n_qubits();
    if ancilla >= n {
        return Err(Error::QubitOutOfRange { qubit: ancilla, n_qubits: n });
    }
    let gates = product.gates();
    let mut out = Circuit::new(n);
    out.global_phase = product.global_phase;
    let mut i = 0;
    while i < gates.len() {
        let g = &gates[i];
        let (pol, rest) = ancilla_control(g, ancilla);
        let Some(pol) = pol else {
            out.push(g.clone())?;
            i += 1;
            continue;
        };
        let Some(h) = gates.get(i + 1) else {
            return Err(Error::StructureMismatch { index: i, reason: "unpaired controlled gate at end".into() });
        };
        let (hpol, hrest) = ancilla_control(h, ancilla);
        if hpol != Some(!pol) {
            return Err(Error::StructureMismatch {
                index: i,
                reason: "expected a partner with the opposite ancilla polarity".into(),
            });
        }
        if !g.kind.same_shape(&h.kind) || g.target != h.target || rest != hrest {
            return Err(Error::StructureMismatch { index: i, reason: format!("`{g}` and `{h}` differ in shape") });
        }
        let (g0, g1) = if pol { (h, g) } else { (g, h) };
        let base = Gate { kind: g0.kind, target: g0.target, controls: rest.clone() };
        out.push(base)?;
        if let (Some(a), Some(b)) = (g0.angle(), g1.angle()) {
            let diff = b - a;
            if diff.abs() >= DROP_ANGLE {
                let mut corr = Gate { kind: g0.kind.with_angle(diff), target: g0.target, controls: rest };
                corr.controls.push(Control::one(ancilla));
                out.push(corr)?;
            }
        }
        i += 2;
    }
    Ok(out)
}

/// Simplified controlled pair of `a` (branch 0) and `b` (branch 1).
pub fn simplify_pair(a: &Circuit, b: &Circuit) -> Result<Circuit> {
    simplify_pair_pass(&pair_product(a, b)?, a.n_qubits())
}

/// Replacement for the 1-controlled `U_k = exp(-i G dt)`: the composite
/// `C0[Trotter(G, dt)] . C1[Trotter(G, 2 dt)]`, rewritten so that only
/// one- and two-qubit gates remain. Acts on `n + 1` qubits, ancilla `n`.
pub fn simplify_uk_pass(generator: &PauliSum, dt: f64) -> Result<Circuit> {
    simplify_pair(&trotter_circuit(generator, dt)?, &trotter_circuit(generator, 2.0 * dt)?)
}

/// Full simplified test: rewritten ansatz pair followed by the rewritten
/// `U_k` composite. Its overlap is `<psi(theta)| T(dt)^dagger T(2 dt)
/// |psi(theta_m)>`, which equals `<psi(theta)| U_k |psi(theta_m)>` up to
/// `O(dt^2)`.
pub fn build_simplified_test(
    theta: &[f64],
    theta_m: &[f64],
    generator: &PauliSum,
    dt: f64,
    spec: AnsatzSpec,
) -> Result<OverlapCircuitPair> {
    check_theta(spec, theta)?;
    check_theta(spec, theta_m)?;
    if generator.n_qubits() != spec.n_qubits {
        return Err(Error::QubitCountMismatch { expected: spec.n_qubits, found: generator.n_qubits() });
    }
    let mut body = simplify_pair(&build_hea(spec, theta)?, &build_hea(spec, theta_m)?)?;
    body.append(&simplify_uk_pass(generator, dt)?)?;
    OverlapCircuitPair::from_body(&body, spec.n_qubits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::run;
    use crate::linalg::max_abs_diff;
    use crate::statevec::{exact_evolve, inner_product};
    use core::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn thetas(spec: AnsatzSpec, seed: u64) -> Vec<f64> {
        let mut rng = SimRng::new(seed);
        (0..spec.parameter_count()).map(|_| (2.0 * rng.uniform() - 1.0) * PI).collect()
    }

    fn direct_overlap(spec: AnsatzSpec, theta: &[f64], theta_m: &[f64], uk: &Circuit) -> C64 {
        let zero = StateVector::zero(spec.n_qubits).unwrap();
        let a = run(&build_hea(spec, theta).unwrap(), &zero).unwrap();
        let b = run(uk, &run(&build_hea(spec, theta_m).unwrap(), &zero).unwrap()).unwrap();
        inner_product(&a, &b).unwrap()
    }

    #[test]
    fn overlap_from_probability_examples() {
        assert_eq!(overlap_from_probabilities(1.0, 0.5).unwrap(), c(1.0, 0.0));
        assert_eq!(overlap_from_probabilities(0.5, 0.5).unwrap(), c(0.0, 0.0));
        assert_eq!(overlap_from_probabilities(0.5, 1.0).unwrap(), c(0.0, 1.0));
        assert!(matches!(overlap_from_probabilities(1.2, 0.5), Err(Error::InvalidProbability(_))));
    }

    #[test]
    fn identical_branches_give_unit_overlap() {
        let spec = AnsatzSpec::new(2, 1);
        let th = thetas(spec, 1);
        let pair = build_reference_test(&th, &th, &Circuit::new(2), spec).unwrap();
        let (pr, _) = pair.probabilities().unwrap();
        assert!((pr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_branches_give_half() {
        let spec = AnsatzSpec::new(1, 1);
        let pair = build_reference_test(&[0.0; 3], &[PI, 0.0, 0.0], &Circuit::new(1), spec).unwrap();
        let (pr, pi) = pair.probabilities().unwrap();
        assert!((pr - 0.5).abs() < 1e-12 && (pi - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reference_test_matches_direct_overlap() {
        let spec = AnsatzSpec::new(2, 2);
        let uk = Circuit::from_gates(2, vec![Gate::ry(0, 0.4), Gate::cnot(0, 1), Gate::rz(1, -1.3)]).unwrap();
        for seed in 0..5 {
            let (th, thm) = (thetas(spec, seed), thetas(spec, seed + 100));
            let x = build_reference_test(&th, &thm, &uk, spec).unwrap().overlap().unwrap();
            assert!((x - direct_overlap(spec, &th, &thm, &uk)).norm() < 1e-12);
        }
    }

    #[test]
    fn imaginary_sign_convention() {
        // <0| Rz(a) |0> = e^{-ia/2}: Im X = -sin(a/2).
        let spec = AnsatzSpec::new(1, 1);
        let uk = Circuit::from_gates(1, vec![Gate::rz(0, 1.0)]).unwrap();
        let x = build_reference_test(&[0.0; 3], &[0.0; 3], &uk, spec).unwrap().overlap().unwrap();
        assert!((x - c((0.5f64).cos(), -(0.5f64).sin())).norm() < 1e-12);
        // Phase(pi/2) on |1> gives +i.
        let uk = Circuit::from_gates(1, vec![Gate::phase(0, PI / 2.0)]).unwrap();
        let x = build_reference_test(&[PI, 0.0, 0.0], &[PI, 0.0, 0.0], &uk, spec).unwrap().overlap().unwrap();
        assert!((x - c(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn four_gate_example_rewrite() {
        let a = Circuit::from_gates(2, vec![Gate::rx(0, 0.3), Gate::ry(1, 0.5), Gate::cnot(0, 1)]).unwrap();
        let b = Circuit::from_gates(2, vec![Gate::rx(0, 1.0), Gate::ry(1, 0.2), Gate::cnot(0, 1)]).unwrap();
        let s = simplify_pair(&a, &b).unwrap();
        let lines: Vec<String> = s.gates().iter().map(|g| g.to_string()).collect();
        let d1 = 1.0 - 0.3;
        let d2 = 0.2 - 0.5;
        assert_eq!(
            lines,
            [
                "RX 0 0.3".to_string(),
                format!("CRX 2 0 {d1:?}"),
                "RY 1 0.5".to_string(),
                format!("CRY 2 1 {d2:?}"),
                "CNOT 0 1".to_string(),
            ]
        );
        let reference = pair_product(&a, &b).unwrap().to_unitary().unwrap();
        assert!(max_abs_diff(&reference, &s.to_unitary().unwrap()) < 1e-12);
    }

    #[test]
    fn equal_parameters_reduce_to_uncontrolled_ansatz() {
        let spec = AnsatzSpec::new(3, 2);
        let th = thetas(spec, 3);
        let u = build_hea(spec, &th).unwrap();
        let s = simplify_pair(&u, &u).unwrap();
        assert_eq!(s, u.embed(4, 0).unwrap());
    }

    #[test]
    fn rewrite_is_exact_on_random_hea() {
        let spec = AnsatzSpec::new(3, 2);
        for seed in 0..10 {
            let a = build_hea(spec, &thetas(spec, seed)).unwrap();
            let b = build_hea(spec, &thetas(spec, seed + 50)).unwrap();
            let reference = pair_product(&a, &b).unwrap();
            let simplified = simplify_pair(&a, &b).unwrap();
            assert!(max_abs_diff(&reference.to_unitary().unwrap(), &simplified.to_unitary().unwrap()) < 1e-10);
            assert!(simplified.max_arity() <= 2);
            assert_eq!(reference.max_arity(), 3);
        }
    }

    #[test]
    fn mismatched_structures_are_rejected() {
        let a = Circuit::from_gates(1, vec![Gate::rx(0, 0.3)]).unwrap();
        let b = Circuit::from_gates(1, vec![Gate::ry(0, 0.3)]).unwrap();
        assert!(matches!(simplify_pair(&a, &b), Err(Error::StructureMismatch { index: 0, .. })));
        let b = Circuit::new(1);
        assert!(matches!(simplify_pair(&a, &b), Err(Error::StructureMismatch { .. })));
    }

    #[test]
    fn zero_generator_uk_is_identity() {
        let g = PauliSum::zero(2).unwrap();
        let uk = simplify_uk_pass(&g, 0.1).unwrap();
        assert!(uk.is_empty() && uk.global_phase == 0.0);
    }

    #[test]
    fn uk_replacement_equals_controlled_pair() {
        let g = PauliSum::from_strs(
            2,
            &[(c(0.7, 0.0), "XY"), (c(-0.4, 0.0), "ZI"), (c(0.3, 0.0), "II"), (c(0.2, 0.0), "YZ")],
        )
        .unwrap();
        let dt = 0.1;
        let reference = pair_product(&trotter_circuit(&g, dt).unwrap(), &trotter_circuit(&g, 2.0 * dt).unwrap()).unwrap();
        let simplified = simplify_uk_pass(&g, dt).unwrap();
        assert!(max_abs_diff(&reference.to_unitary().unwrap(), &simplified.to_unitary().unwrap()) < 1e-12);
        assert!(simplified.max_arity() <= 2);
    }

    #[test]
    fn uk_replacement_error_is_quadratic() {
        // Single-qubit generator with non-commuting terms.
        let g = PauliSum::from_strs(1, &[(c(0.8, 0.0), "X"), (c(-0.5, 0.0), "Z"), (c(0.2, 0.0), "I")]).unwrap();
        let spec = AnsatzSpec::new(1, 1);
        let (th, thm) = (thetas(spec, 8), thetas(spec, 9));
        let err = |dt: f64| {
            let got = build_simplified_test(&th, &thm, &g, dt, spec).unwrap().overlap().unwrap();
            let zero = StateVector::zero(1).unwrap();
            let a = run(&build_hea(spec, &th).unwrap(), &zero).unwrap();
            let b = exact_evolve(&g, dt, &run(&build_hea(spec, &thm).unwrap(), &zero).unwrap()).unwrap().state;
            (got - inner_product(&a, &b).unwrap()).norm()
        };
        let ratio = err(0.05) / err(0.025);
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn sampled_overlap_within_shot_noise() {
        let g = PauliSum::from_strs(2, &[(c(0.6, 0.0), "XX"), (c(0.9, 0.0), "ZI")]).unwrap();
        let spec = AnsatzSpec::new(2, 1);
        let pair = build_simplified_test(&thetas(spec, 1), &thetas(spec, 2), &g, 0.1, spec).unwrap();
        let (pr, pi) = pair.probabilities().unwrap();
        let shots = 20_000u64;
        let mut rng = SimRng::new(77);
        let x = pair.sampled_overlap(shots, &mut rng).unwrap();
        let sig = |p: f64| 2.0 * (p * (1.0 - p) / shots as f64).sqrt();
        assert!((x.re - (2.0 * pr - 1.0)).abs() < 5.0 * sig(pr));
        assert!((x.im - (2.0 * pi - 1.0)).abs() < 5.0 * sig(pi));
    }
}
