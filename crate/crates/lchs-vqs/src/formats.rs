//! Plain-text file formats. Blank lines and `#` comments are ignored
//! everywhere.
//!
//! * operator: `<re> <im> <letters>` per term, e.g. `-1.0 0.0 ZZIIII`
//! * gate list: `<kind> <qubits...> [angle] [polarities]` per gate; a
//!   rotation without an angle is a parameter slot, `GPHASE <angle>` sets the
//!   global phase
//! * counts: `<bitstring> <count>`
//! * calibration: `<p01> <p10>` per qubit, qubit 0 first

use std::fmt::Write as _;
use std::path::Path;

use lchs_vqs_core::circuit::{Circuit, Control, Gate, GateKind, ParamCircuit};
use lchs_vqs_core::mitigation::CalibrationMatrix;
use lchs_vqs_core::pauli::{PauliSum, PauliTerm, PauliWord};
use lchs_vqs_core::statevec::{index_to_bits, Counts};
use lchs_vqs_core::C64;

use crate::error::{CliError, Result};

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

/// Non-empty lines with comments stripped, numbered from 1.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_err(origin: &str, line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse { path: origin.to_string(), line, message: message.into() }
}

/// Real number, optionally written as a multiple of pi (`0.3pi`, `-pi/2`).
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    let lower = s.to_ascii_lowercase();
    if let Some(pos) = lower.find("pi") {
        let (head, tail) = (&lower[..pos], &lower[pos + 2..]);
        let factor = match head.trim_end_matches('*') {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => h.parse::<f64>().ok()?,
        };
        let div = match tail {
            "" => 1.0,
            t => t.strip_prefix('/')?.parse::<f64>().ok()?,
        };
        return Some(factor * std::f64::consts::PI / div);
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

pub fn parse_operator(text: &str, origin: &str) -> Result<PauliSum> {
    let mut terms = Vec::new();
    let mut width = None;
    for (line, l) in content_lines(text) {
        let fields: Vec<&str> = l.split_whitespace().collect();
        let [re, im, letters] = fields[..] else {
            return Err(parse_err(origin, line, "expected `<re> <im> <letters>`"));
        };
        let re = parse_real(re).ok_or_else(|| parse_err(origin, line, format!("bad number `{re}`")))?;
        let im = parse_real(im).ok_or_else(|| parse_err(origin, line, format!("bad number `{im}`")))?;
        let word = PauliWord::parse(letters).map_err(|e| parse_err(origin, line, e.to_string()))?;
        if *width.get_or_insert(word.n_qubits()) != word.n_qubits() {
            return Err(parse_err(origin, line, "terms act on different qubit counts"));
        }
        terms.push(PauliTerm::new(C64::new(re, im), word));
    }
    let n = width.ok_or_else(|| parse_err(origin, 0, "operator has no terms"))?;
    PauliSum::new(n, terms).map_err(|e| parse_err(origin, 0, e.to_string()))
}

pub fn emit_operator(op: &PauliSum) -> String {
    let mut out = String::new();
    for t in op.terms() {
        writeln!(out, "{:?} {:?} {}", t.coeff.re, t.coeff.im, t.word).expect("string write");
    }
    out
}

/// Splits a gate class such as `CCRX` or `CNOT` into control count and base.
fn split_class(class: &str) -> Option<(usize, GateKind)> {
    let upper = class.to_ascii_uppercase();
    let mut controls = 0;
    let mut rest = upper.as_str();
    loop {
        if let Some(kind) = GateKind::from_name(rest) {
            return Some((controls, kind));
        }
        rest = rest.strip_prefix('C')?;
        controls += 1;
    }
}

/// Parses a gate list. Slots are the indices of rotations written without an
/// angle. The register width is `qubits` when given, otherwise one more
/// than the largest qubit index.
pub fn parse_gate_list(text: &str, origin: &str, qubits: Option<usize>) -> Result<ParamCircuit> {
    let mut gates = Vec::new();
    let mut slots = Vec::new();
    let mut phase = 0.0;
    let mut width = 0;
    for (line, l) in content_lines(text) {
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields[0].eq_ignore_ascii_case("GPHASE") {
            let a = fields.get(1).and_then(|s| parse_real(s));
            phase = a.ok_or_else(|| parse_err(origin, line, "GPHASE needs an angle"))?;
            continue;
        }
        let (n_controls, kind) =
            split_class(fields[0]).ok_or_else(|| parse_err(origin, line, format!("unknown gate `{}`", fields[0])))?;
        let arity = n_controls + 1;
        if fields.len() < 1 + arity {
            return Err(parse_err(origin, line, format!("`{}` needs {arity} qubit indices", fields[0])));
        }
        let qs = fields[1..=arity]
            .iter()
            .map(|s| s.parse::<usize>().map_err(|_| parse_err(origin, line, format!("bad qubit index `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        let mut rest = &fields[1 + arity..];
        let mut kind = kind;
        if kind.is_parametric() {
            match rest.first().and_then(|s| parse_real(s)) {
                Some(a) if !(n_controls > 0 && is_polarity(rest[0], n_controls)) => {
                    kind = kind.with_angle(a);
                    rest = &rest[1..];
                }
                _ => slots.push(gates.len()),
            }
        }
        let polarities: Vec<bool> = match rest {
            [] => vec![true; n_controls],
            [p] if is_polarity(p, n_controls) => p.chars().map(|c| c == '1').collect(),
            _ => return Err(parse_err(origin, line, format!("unexpected trailing fields {rest:?}"))),
        };
        let controls = qs[..n_controls].iter().zip(polarities).map(|(&q, p)| Control { qubit: q, polarity: p }).collect();
        width = width.max(qs.iter().max().map_or(0, |m| m + 1));
        gates.push((line, Gate { kind, target: qs[n_controls], controls }));
    }
    let n = match qubits {
        Some(q) if q < width => return Err(parse_err(origin, 0, format!("gate list uses {width} qubits, register has {q}"))),
        Some(q) => q,
        None => width.max(1),
    };
    let mut circuit = Circuit::new(n);
    circuit.global_phase = phase;
    for (line, g) in gates {
        circuit.push(g).map_err(|e| parse_err(origin, line, e.to_string()))?;
    }
    ParamCircuit::new(circuit, slots).map_err(|e| parse_err(origin, 0, e.to_string()))
}

fn is_polarity(s: &str, n_controls: usize) -> bool {
    n_controls > 0 && s.len() == n_controls && s.chars().all(|c| c == '0' || c == '1')
}

pub fn emit_gate_list(circuit: &Circuit) -> String {
    let mut out = format!("# qubits {}\n", circuit.n_qubits());
    out.push_str(&circuit.to_string());
    if circuit.global_phase != 0.0 {
        writeln!(out, "GPHASE {:?}", circuit.global_phase).expect("string write");
    }
    out
}

/// Parameter vector separated by whitespace or commas.
pub fn parse_parameters(text: &str, origin: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (line, l) in content_lines(text) {
        for tok in l.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            out.push(parse_real(tok).ok_or_else(|| parse_err(origin, line, format!("bad number `{tok}`")))?);
        }
    }
    Ok(out)
}

pub fn parse_counts(text: &str, origin: &str) -> Result<Counts> {
    let mut counts: Option<Counts> = None;
    for (line, l) in content_lines(text) {
        let fields: Vec<&str> = l.split_whitespace().collect();
        let [bits, n] = fields[..] else {
            return Err(parse_err(origin, line, "expected `<bitstring> <count>`"));
        };
        let n: u64 = n.parse().map_err(|_| parse_err(origin, line, format!("bad count `{n}`")))?;
        let c = counts.get_or_insert_with(|| Counts::new(bits.len()));
        if bits.len() != c.n_qubits() {
            return Err(parse_err(origin, line, "bit strings have different lengths"));
        }
        c.add_bits(bits, n).map_err(|e| parse_err(origin, line, e.to_string()))?;
    }
    counts.ok_or_else(|| parse_err(origin, 0, "no counts"))
}

pub fn emit_counts(counts: &Counts) -> String {
    let mut out = String::new();
    for (i, n) in counts.iter() {
        writeln!(out, "{} {n}", index_to_bits(counts.n_qubits(), i)).expect("string write");
    }
    out
}

pub fn parse_calibration(text: &str, origin: &str) -> Result<CalibrationMatrix> {
    let mut flips = Vec::new();
    for (line, l) in content_lines(text) {
        let fields: Vec<&str> = l.split_whitespace().collect();
        let [a, b] = fields[..] else {
            return Err(parse_err(origin, line, "expected `<p01> <p10>`"));
        };
        let p = |s: &str| parse_real(s).ok_or_else(|| parse_err(origin, line, format!("bad probability `{s}`")));
        flips.push((p(a)?, p(b)?));
    }
    CalibrationMatrix::new(flips).map_err(|e| parse_err(origin, 0, e.to_string()))
}

pub fn emit_calibration(cal: &CalibrationMatrix) -> String {
    let mut out = String::from("# p01 p10 per qubit\n");
    for (a, b) in cal.flips() {
        writeln!(out, "{a:?} {b:?}").expect("string write");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use lchs_vqs_core::circuit::{AnsatzSpec, Gate};

    #[test]
    fn reals_with_pi() {
        assert_eq!(parse_real("0.5"), Some(0.5));
        assert!((parse_real("0.3pi").unwrap() - 0.3 * std::f64::consts::PI).abs() < 1e-15);
        assert!((parse_real("-pi/2").unwrap() + std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(parse_real("nan"), None);
        assert_eq!(parse_real("pix"), None);
    }

    #[test]
    fn operator_round_trip() {
        let text = "# ising pair\n-1.0 0.0 ZZ\n-2 -0.5 XI\n";
        let op = parse_operator(text, "op").unwrap();
        assert_eq!(op.n_qubits(), 2);
        assert_eq!(parse_operator(&emit_operator(&op), "again").unwrap(), op);
        assert!(matches!(parse_operator("1 0 ZZ\n1 0 X\n", "bad"), Err(CliError::Parse { line: 2, .. })));
        assert!(parse_operator("1 ZZ\n", "bad").is_err());
        assert!(parse_operator("1 0 ZQ\n", "bad").is_err());
    }

    #[test]
    fn gate_list_round_trip() {
        let mut c = Circuit::new(3);
        c.push(Gate::rx(0, 0.25)).unwrap();
        c.push(Gate::cz(0, 1)).unwrap();
        c.push(Gate::cnot(2, 1)).unwrap();
        c.push(Gate::ry(1, -1.5).controlled(2, false)).unwrap();
        c.push(Gate::h(2).controlled(0, true).controlled(1, false)).unwrap();
        c.global_phase = 0.125;
        let text = emit_gate_list(&c);
        let back = parse_gate_list(&text, "gl", None).unwrap();
        assert!(back.slots().is_empty());
        assert_eq!(back.template(), &c);
    }

    #[test]
    fn gate_list_slots_bind_like_the_ansatz() {
        let spec = AnsatzSpec::new(2, 1);
        let text = spec.template().template().to_string();
        let stripped: String = text
            .lines()
            .map(|l| {
                let f: Vec<&str> = l.split_whitespace().collect();
                if f[0].starts_with('R') { format!("{} {}\n", f[0], f[1]) } else { format!("{l}\n") }
            })
            .collect();
        let pc = parse_gate_list(&stripped, "hea", None).unwrap();
        assert_eq!(pc.parameter_count(), 6);
        let theta = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        assert_eq!(pc.bind(&theta).unwrap(), spec.template().bind(&theta).unwrap());
    }

    #[test]
    fn malformed_gate_lists() {
        for bad in ["FOO 0", "CZ 0", "RX a 0.1", "CZ 0 0", "RX 0 0.1 extra", "CRX 0 1 0.1 2"] {
            assert!(parse_gate_list(bad, "bad", None).is_err(), "{bad}");
        }
        assert!(parse_gate_list("H 3", "narrow", Some(2)).is_err());
    }

    #[test]
    fn counts_and_calibration() {
        let counts = parse_counts("00 7\n11 3\n# tail\n", "c").unwrap();
        assert_eq!(counts.total(), 10);
        assert_eq!(parse_counts(&emit_counts(&counts), "c").unwrap(), counts);
        assert!(parse_counts("0 1\n00 1\n", "c").is_err());
        assert!(parse_counts("01 x\n", "c").is_err());
        let cal = parse_calibration("0.02 0.05\n0.01 0.03\n", "cal").unwrap();
        assert_eq!(cal.n_qubits(), 2);
        assert_eq!(parse_calibration(&emit_calibration(&cal), "cal").unwrap(), cal);
        assert!(parse_calibration("1.5 0\n", "cal").is_err());
    }

    #[test]
    fn parameter_lists() {
        assert_eq!(parse_parameters("0.1, 0.2\n0.3 pi", "p").unwrap(), vec![0.1, 0.2, 0.3, std::f64::consts::PI]);
        assert!(parse_parameters("0.1 x", "p").is_err());
    }
}
