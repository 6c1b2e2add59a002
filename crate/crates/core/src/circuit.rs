//! Gate-level circuits: IR, execution, control lifting, the
//! hardware-efficient ansatz and first-order Trotter compilation.

use core::f64::consts::FRAC_PI_2;
use core::fmt;

use nalgebra::DMatrix;

use crate::pauli::{Pauli, PauliSum, DEFAULT_DENSE_CAP};
use crate::prelude::*;
use crate::statevec::{apply_single, StateVector};
use crate::{Error, Result};

/// Base single-qubit operation of a gate. Angles are in radians.
///
/// `Rx(a) = exp(-i a X / 2)` and likewise for `Ry`, `Rz`;
/// `Phase(a) = diag(1, e^{ia})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GateKind {
    Rx(f64),
    Ry(f64),
    Rz(f64),
    Phase(f64),
    H,
    S,
    Sdg,
    X,
    Z,
}

impl GateKind {
    pub fn angle(&self) -> Option<f64> {
        match *self {
            GateKind::Rx(a) | GateKind::Ry(a) | GateKind::Rz(a) | GateKind::Phase(a) => Some(a),
            _ => None,
        }
    }

    pub fn is_parametric(&self) -> bool {
        self.angle().is_some()
    }

    /// Same kind with a different angle; fixed kinds are returned unchanged.
    pub fn with_angle(&self, angle: f64) -> Self {
        match *self {
            GateKind::Rx(_) => GateKind::Rx(angle),
            GateKind::Ry(_) => GateKind::Ry(angle),
            GateKind::Rz(_) => GateKind::Rz(angle),
            GateKind::Phase(_) => GateKind::Phase(angle),
            other => other,
        }
    }

    /// Whether two kinds differ at most in their angle.
    pub fn same_shape(&self, other: &Self) -> bool {
        core::mem::discriminant(self) == core::mem::discriminant(other)
    }

    pub fn name(&self) -> &'static str {
        match self {
            GateKind::Rx(_) => "RX",
            GateKind::Ry(_) => "RY",
            GateKind::Rz(_) => "RZ",
            GateKind::Phase(_) => "P",
            GateKind::H => "H",
            GateKind::S => "S",
            GateKind::Sdg => "SDG",
            GateKind::X => "X",
            GateKind::Z => "Z",
        }
    }

    /// Parses a base name; rotations get angle 0.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name.to_ascii_uppercase().as_str() {
            "RX" => GateKind::Rx(0.0),
            "RY" => GateKind::Ry(0.0),
            "RZ" => GateKind::Rz(0.0),
            "P" | "PHASE" => GateKind::Phase(0.0),
            "H" => GateKind::H,
            "S" => GateKind::S,
            "SDG" => GateKind::Sdg,
            "X" | "NOT" => GateKind::X,
            "Z" => GateKind::Z,
            _ => return None,
        })
    }

    pub fn inverse(&self) -> Self {
        match *self {
            GateKind::Rx(a) => GateKind::Rx(-a),
            GateKind::Ry(a) => GateKind::Ry(-a),
            GateKind::Rz(a) => GateKind::Rz(-a),
            GateKind::Phase(a) => GateKind::Phase(-a),
            GateKind::S => GateKind::Sdg,
            GateKind::Sdg => GateKind::S,
            other => other,
        }
    }

    /// Row-major 2x2 matrix.
    pub fn matrix(&self) -> [[C64; 2]; 2] {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let r = core::f64::consts::FRAC_1_SQRT_2;
        match *self {
            GateKind::Rx(a) => {
                let (s, c) = (a / 2.0).sin_cos();
                [[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]]
            }
            GateKind::Ry(a) => {
                let (s, c) = (a / 2.0).sin_cos();
                [[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]]
            }
            GateKind::Rz(a) => {
                let (s, c) = (a / 2.0).sin_cos();
                [[C64::new(c, -s), z], [z, C64::new(c, s)]]
            }
            GateKind::Phase(a) => {
                let (s, c) = a.sin_cos();
                [[one, z], [z, C64::new(c, s)]]
            }
            GateKind::H => [[C64::new(r, 0.0), C64::new(r, 0.0)], [C64::new(r, 0.0), C64::new(-r, 0.0)]],
            GateKind::S => [[one, z], [z, C64::new(0.0, 1.0)]],
            GateKind::Sdg => [[one, z], [z, C64::new(0.0, -1.0)]],
            GateKind::X => [[z, one], [one, z]],
            GateKind::Z => [[one, z], [z, -one]],
        }
    }

    /// Pauli generator `P` and factor `f` with `d/da gate(a) = -i f P gate(a)`.
    pub fn generator(&self) -> Option<(Pauli, f64)> {
        match self {
            GateKind::Rx(_) => Some((Pauli::X, 0.5)),
            GateKind::Ry(_) => Some((Pauli::Y, 0.5)),
            GateKind::Rz(_) => Some((Pauli::Z, 0.5)),
            _ => None,
        }
    }
}

/// A control qubit; `polarity` is the bit value that activates the gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Control {
    pub qubit: usize,
    pub polarity: bool,
}

impl Control {
    pub fn one(qubit: usize) -> Self {
        Self { qubit, polarity: true }
    }

    pub fn zero(qubit: usize) -> Self {
        Self { qubit, polarity: false }
    }
}

/// A single-qubit operation with any number of controls.
///
/// `CNOT` is `X` with one control, `CZ` is `Z` with one control, `CRx` is
/// `Rx` with one control and two or more controls form the multi-controlled
/// (CCZ) class.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    pub controls: Vec<Control>,
}

impl Gate {
    pub fn new(kind: GateKind, target: usize) -> Self {
        Self { kind, target, controls: Vec::new() }
    }

    pub fn rx(q: usize, a: f64) -> Self {
        Self::new(GateKind::Rx(a), q)
    }

    pub fn ry(q: usize, a: f64) -> Self {
        Self::new(GateKind::Ry(a), q)
    }

    pub fn rz(q: usize, a: f64) -> Self {
        Self::new(GateKind::Rz(a), q)
    }

    pub fn phase(q: usize, a: f64) -> Self {
        Self::new(GateKind::Phase(a), q)
    }

    pub fn h(q: usize) -> Self {
        Self::new(GateKind::H, q)
    }

    pub fn s(q: usize) -> Self {
        Self::new(GateKind::S, q)
    }

    pub fn sdg(q: usize) -> Self {
        Self::new(GateKind::Sdg, q)
    }

    pub fn x(q: usize) -> Self {
        Self::new(GateKind::X, q)
    }

    pub fn z(q: usize) -> Self {
        Self::new(GateKind::Z, q)
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self::x(target).controlled(control, true)
    }

    pub fn cz(a: usize, b: usize) -> Self {
        Self::z(b).controlled(a, true)
    }

    /// Adds one more control.
    pub fn controlled(mut self, qubit: usize, polarity: bool) -> Self {
        self.controls.push(Control { qubit, polarity });
        self
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn angle(&self) -> Option<f64> {
        self.kind.angle()
    }

    /// Number of qubits the gate touches.
    pub fn arity(&self) -> usize {
        1 + self.controls.len()
    }

    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.controls.iter().map(|c| c.qubit).chain(core::iter::once(self.target))
    }

    pub fn matrix(&self) -> [[C64; 2]; 2] {
        self.kind.matrix()
    }

    pub fn inverse(&self) -> Self {
        Self { kind: self.kind.inverse(), target: self.target, controls: self.controls.clone() }
    }

    /// Class label used in gate counts and the gate-list format, e.g. `RX`,
    /// `CZ`, `CNOT`, `CRX`, `CCZ`.
    pub fn class_name(&self) -> String {
        let base = self.kind.name();
        match (self.controls.len(), self.kind) {
            (1, GateKind::X) => "CNOT".to_string(),
            (n, _) => {
                let mut s = "C".repeat(n);
                s.push_str(base);
                s
            }
        }
    }

    /// Bit mask and value over basis indices selecting the active subspace.
    pub fn control_condition(&self, n_qubits: usize) -> (usize, usize) {
        let mut mask = 0;
        let mut value = 0;
        for c in &self.controls {
            let bit = 1usize << (n_qubits - 1 - c.qubit);
            mask |= bit;
            if c.polarity {
                value |= bit;
            }
        }
        (mask, value)
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        for q in self.qubits() {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange { qubit: q, n_qubits });
            }
        }
        for (i, c) in self.controls.iter().enumerate() {
            if c.qubit == self.target || self.controls[..i].iter().any(|d| d.qubit == c.qubit) {
                return Err(Error::ControlCollision(c.qubit));
            }
        }
        if let Some(a) = self.angle() {
            if !a.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(())
    }

    fn remapped(&self, map: &dyn Fn(usize) -> usize) -> Self {
        Self {
            kind: self.kind,
            target: map(self.target),
            controls: self.controls.iter().map(|c| Control { qubit: map(c.qubit), polarity: c.polarity }).collect(),
        }
    }
}

impl fmt::Display for Gate {
    /// Gate-list line: `<kind> <controls...> <target> [angle] [polarities]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.class_name())?;
        for q in self.qubits() {
            write!(f, " {q}")?;
        }
        if let Some(a) = self.angle() {
            write!(f, " {a:?}")?;
        }
        if self.controls.iter().any(|c| !c.polarity) {
            write!(f, " ")?;
            for c in &self.controls {
                write!(f, "{}", if c.polarity { '1' } else { '0' })?;
            }
        }
        Ok(())
    }
}

/// Ordered gate sequence on a fixed register, with a global phase factor
/// `e^{i global_phase}` applied after the gates.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    pub global_phase: f64,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, gates: Vec::new(), global_phase: 0.0 }
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut c = Self::new(n_qubits);
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Appends `other` (applied after `self`).
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::QubitCountMismatch { expected: self.n_qubits, found: other.n_qubits });
        }
        self.gates.extend(other.gates.iter().cloned());
        self.global_phase += other.global_phase;
        Ok(())
    }

    /// Same circuit on a larger register with qubit `q` moved to `offset + q`.
    pub fn embed(&self, n_total: usize, offset: usize) -> Result<Circuit> {
        if offset + self.n_qubits > n_total {
            return Err(Error::QubitOutOfRange { qubit: offset + self.n_qubits - 1, n_qubits: n_total });
        }
        let gates = self.gates.iter().map(|g| g.remapped(&|q| q + offset)).collect();
        Ok(Circuit { n_qubits: n_total, gates, global_phase: self.global_phase })
    }

    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
            global_phase: -self.global_phase,
        }
    }

    /// Applies the circuit in place.
    pub fn apply(&self, state: &mut StateVector) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::QubitCountMismatch { expected: self.n_qubits, found: state.n_qubits() });
        }
        let n = self.n_qubits;
        let amps = state.amplitudes_mut();
        for g in &self.gates {
            let (mask, value) = g.control_condition(n);
            apply_single(amps, &g.matrix(), n - 1 - g.target, mask, value);
        }
        if self.global_phase != 0.0 {
            let (s, c) = self.global_phase.sin_cos();
            let ph = C64::new(c, s);
            for a in amps.iter_mut() {
                *a *= ph;
            }
        }
        Ok(())
    }

    /// Dense unitary, column `j` being the image of basis state `j`.
    pub fn to_unitary(&self) -> Result<DMatrix<C64>> {
        if self.n_qubits > DEFAULT_DENSE_CAP {
            return Err(Error::DenseCapExceeded { n_qubits: self.n_qubits, cap: DEFAULT_DENSE_CAP });
        }
        let dim = 1usize << self.n_qubits;
        let mut u = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let mut s = StateVector::basis_index(self.n_qubits, j)?;
            self.apply(&mut s)?;
            for (i, a) in s.amplitudes().iter().enumerate() {
                u[(i, j)] = *a;
            }
        }
        Ok(u)
    }

    /// Every gate gains `ancilla` as an extra control of the given polarity.
    /// The global phase becomes a phase gate on the ancilla.
    pub fn add_control(&self, ancilla: usize, polarity: bool) -> Result<Circuit> {
        if ancilla >= self.n_qubits {
            return Err(Error::QubitOutOfRange { qubit: ancilla, n_qubits: self.n_qubits });
        }
        if self.gates.iter().any(|g| g.qubits().any(|q| q == ancilla)) {
            return Err(Error::ControlCollision(ancilla));
        }
        let mut out = Circuit::new(self.n_qubits);
        out.gates = self.gates.iter().map(|g| g.clone().controlled(ancilla, polarity)).collect();
        push_controlled_phase(&mut out, ancilla, polarity, self.global_phase);
        Ok(out)
    }

    /// Largest number of qubits touched by a single gate.
    pub fn max_arity(&self) -> usize {
        self.gates.iter().map(Gate::arity).max().unwrap_or(0)
    }

    /// Gate count per class name.
    pub fn gate_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for g in &self.gates {
            *counts.entry(g.class_name()).or_insert(0) += 1;
        }
        counts
    }

    /// Number of gates acting on two or more qubits.
    pub fn multi_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.arity() >= 2).count()
    }

    /// As-soon-as-possible layer count.
    pub fn depth(&self) -> usize {
        let mut level = vec![0usize; self.n_qubits];
        let mut depth = 0;
        for g in &self.gates {
            let l = g.qubits().map(|q| level[q]).max().unwrap_or(0) + 1;
            for q in g.qubits() {
                level[q] = l;
            }
            depth = depth.max(l);
        }
        depth
    }
}

/// Appends `e^{i phi}` conditioned on the ancilla reading `polarity`.
pub(crate) fn push_controlled_phase(c: &mut Circuit, ancilla: usize, polarity: bool, phi: f64) {
    if phi == 0.0 {
        return;
    }
    if polarity {
        c.gates.push(Gate::phase(ancilla, phi));
    } else {
        c.global_phase += phi;
        c.gates.push(Gate::phase(ancilla, -phi));
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.gates {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

/// Sequential application of `circuit` to a copy of `psi0`.
pub fn run(circuit: &Circuit, psi0: &StateVector) -> Result<StateVector> {
    let mut s = psi0.clone();
    circuit.apply(&mut s)?;
    Ok(s)
}

/// A circuit whose parameterized gates at `slots` take their angles from a
/// parameter vector, in slot order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamCircuit {
    circuit: Circuit,
    slots: Vec<usize>,
}

impl ParamCircuit {
    pub fn new(circuit: Circuit, slots: Vec<usize>) -> Result<Self> {
        for &s in &slots {
            match circuit.gates.get(s) {
                Some(g) if g.kind.is_parametric() => {}
                _ => return Err(Error::InvalidArgument(format!("slot {s} is not a parameterized gate"))),
            }
        }
        Ok(Self { circuit, slots })
    }

    pub fn parameter_count(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn template(&self) -> &Circuit {
        &self.circuit
    }

    pub fn bind(&self, theta: &[f64]) -> Result<Circuit> {
        if theta.len() != self.slots.len() {
            return Err(Error::ParameterCount { expected: self.slots.len(), found: theta.len() });
        }
        let mut c = self.circuit.clone();
        for (&s, &a) in self.slots.iter().zip(theta) {
            if !a.is_finite() {
                return Err(Error::NonFinite);
            }
            c.gates[s].kind = c.gates[s].kind.with_angle(a);
        }
        Ok(c)
    }
}

/// Shape of the hardware-efficient ansatz.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub layers: usize,
}

impl AnsatzSpec {
    pub fn new(n_qubits: usize, layers: usize) -> Self {
        Self { n_qubits, layers }
    }

    pub fn parameter_count(&self) -> usize {
        3 * self.n_qubits * self.layers
    }

    /// Index of rotation `r` (0 to 2) on `qubit` in `layer`.
    pub fn parameter_index(&self, layer: usize, qubit: usize, r: usize) -> usize {
        (layer * self.n_qubits + qubit) * 3 + r
    }

    pub fn template(&self) -> ParamCircuit {
        hea_template(*self)
    }
}

/// Parameterized ansatz: per layer `Rx Rz Rx` on each qubit in ascending
/// order, then CZ on pairs (0,1), (2,3), ... and then (1,2), (3,4), ...
pub fn hea_template(spec: AnsatzSpec) -> ParamCircuit {
    let n = spec.n_qubits;
    let mut c = Circuit::new(n);
    let mut slots = Vec::with_capacity(spec.parameter_count());
    for _ in 0..spec.layers {
        for q in 0..n {
            for kind in [GateKind::Rx(0.0), GateKind::Rz(0.0), GateKind::Rx(0.0)] {
                slots.push(c.gates.len());
                c.gates.push(Gate::new(kind, q));
            }
        }
        for start in [0, 1] {
            let mut a = start;
            while a + 1 < n {
                c.gates.push(Gate::cz(a, a + 1));
                a += 2;
            }
        }
    }
    ParamCircuit { circuit: c, slots }
}

pub fn build_hea(spec: AnsatzSpec, theta: &[f64]) -> Result<Circuit> {
    hea_template(spec).bind(theta)
}

/// First-order Trotter product of `exp(-i c_j P_j t)` over the terms of a
/// Hermitian sum, in canonical term order. Identity terms go into the
/// global phase.
pub fn trotter_circuit(h: &PauliSum, t: f64) -> Result<Circuit> {
    trotter_circuit_steps(h, t, 1)
}

/// `steps` repetitions of the single-slice product at `t / steps`.
pub fn trotter_circuit_steps(h: &PauliSum, t: f64, steps: usize) -> Result<Circuit> {
    h.require_hermitian()?;
    if steps == 0 {
        return Err(Error::InvalidArgument("Trotter step count must be positive".into()));
    }
    if !t.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = h.n_qubits();
    let dt = t / steps as f64;
    let mut slice = Circuit::new(n);
    for term in h.terms() {
        let c = term.coeff.re;
        push_pauli_rotation(&mut slice, &term.word.letters().collect::<Vec<_>>(), c * dt);
    }
    let mut out = Circuit::new(n);
    for _ in 0..steps {
        out.append(&slice)?;
    }
    Ok(out)
}

/// Appends `exp(-i a P)` for a Pauli word given letter by letter.
fn push_pauli_rotation(c: &mut Circuit, letters: &[Pauli], a: f64) {
    let support: Vec<usize> = (0..letters.len()).filter(|&q| letters[q] != Pauli::I).collect();
    let Some(&last) = support.last() else {
        c.global_phase -= a;
        return;
    };
    for &q in &support {
        match letters[q] {
            Pauli::X => c.gates.push(Gate::h(q)),
            Pauli::Y => c.gates.push(Gate::rx(q, FRAC_PI_2)),
            _ => {}
        }
    }
    for w in support.windows(2) {
        c.gates.push(Gate::cnot(w[0], w[1]));
    }
    c.gates.push(Gate::rz(last, 2.0 * a));
    for w in support.windows(2).rev() {
        c.gates.push(Gate::cnot(w[0], w[1]));
    }
    for &q in &support {
        match letters[q] {
            Pauli::X => c.gates.push(Gate::h(q)),
            Pauli::Y => c.gates.push(Gate::rx(q, -FRAC_PI_2)),
            _ => {}
        }
    }
}
