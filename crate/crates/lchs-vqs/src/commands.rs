//! Subcommand implementations. Each returns its outputs as strings so the
//! binary decides where they go.

use std::path::{Path, PathBuf};

use lchs_vqs_core::circuit::{trotter_circuit, Circuit, ParamCircuit};
use lchs_vqs_core::hadamard::{pair_product, simplify_pair, simplify_pair_pass};
use lchs_vqs_core::lchs::{build_quadrature, lchs_error_curve};
use lchs_vqs_core::linalg::max_abs_diff;
use lchs_vqs_core::mitigation::{diagonal_of, mitigate, CalibrationMatrix, ReadoutNoiseModel};
use lchs_vqs_core::pauli::{hermitian_split, Pauli, PauliSum, PauliTerm, PauliWord};
use lchs_vqs_core::statevec::{Counts, Observable, Propagator};
use lchs_vqs_core::vqs::{sampled_replay, ReplayNoise, VqsEngine, VqsTrace};
use serde_json::{json, Map, Value};

use crate::config::{bench_pairs, exact_grid, model_setup, time_grid, vqs_config, ModelSetup, Settings};
use crate::error::{invalid, CliError, Result};

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    fn row(&mut self, fields: &[String]) {
        self.writer.write_record(fields).expect("in-memory write");
    }

    fn finish(self) -> String {
        String::from_utf8(self.writer.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

fn num(x: f64) -> String {
    // Normalizes -0 so identical results print identically.
    format!("{}", x + 0.0)
}

/// `|b><b| = 2^-n sum_S prod_{q in S} (+-Z_q)` with `-` where bit `q` is set.
fn basis_projector(n: usize, index: usize) -> lchs_vqs_core::Result<PauliSum> {
    let scale = 0.5f64.powi(n as i32);
    let terms = (0..1usize << n)
        .map(|subset| {
            let qs: Vec<usize> = (0..n).filter(|q| subset >> q & 1 == 1).collect();
            let flips = qs.iter().filter(|&&q| index >> (n - 1 - q) & 1 == 1).count();
            let sign = if flips % 2 == 0 { 1.0 } else { -1.0 };
            let ops: Vec<(usize, Pauli)> = qs.iter().map(|&q| (q, Pauli::Z)).collect();
            Ok(PauliTerm::new(lchs_vqs_core::C64::new(sign * scale, 0.0), PauliWord::sparse(n, &ops)?))
        })
        .collect::<lchs_vqs_core::Result<Vec<_>>>()?;
    PauliSum::new(n, terms)
}

/// Observables measurable in the computational basis.
fn diagonal_observables(setup: &ModelSetup) -> Vec<(String, PauliSum)> {
    setup
        .observables
        .iter()
        .filter_map(|o| match &o.observable {
            Observable::Pauli(op) if diagonal_of(op).is_ok() => Some((o.name.clone(), op.clone())),
            Observable::Projector(psi) if setup.n_qubits() <= 8 => {
                let idx = psi.as_basis_index(1e-12)?;
                basis_projector(setup.n_qubits(), idx).ok().map(|op| (o.name.clone(), op))
            }
            _ => None,
        })
        .collect()
}

/// LCHS-vs-dense observable curves for every `(K, dk)` in `bench.pairs`.
pub fn bench_lchs(s: &Settings) -> Result<String> {
    let setup = model_setup(s, false)?;
    let pairs = bench_pairs(s)?;
    let grid = time_grid(s.real("bench.t_max")?, s.real("bench.dt")?)?;
    let obs = match s.get("bench.observable") {
        "auto" => setup.observables[0].clone(),
        name => setup
            .observables
            .iter()
            .find(|o| o.name == name)
            .cloned()
            .ok_or_else(|| CliError::config(format!("model {} has no observable `{name}`", setup.name)))?,
    };
    let quads = pairs.iter().map(|&(k, dk)| invalid(build_quadrature(k, dk))).collect::<Result<Vec<_>>>()?;
    let split = hermitian_split(&setup.hamiltonian);
    let mut table = Table::new(&["t", "config", "observable_lchs", "observable_exact", "abs_error"]);
    for (&(k, dk), quad) in pairs.iter().zip(&quads) {
        let label = format!("K={k};dk={dk}");
        for p in lchs_error_curve(&split, quad, &grid, &setup.initial, &obs.observable)? {
            table.row(&[num(p.t), label.clone(), num(p.lchs), num(p.exact), num(p.abs_error)]);
        }
    }
    Ok(table.finish())
}

/// Dense-oracle observables and cumulative log norm on the exact grid.
pub fn evolve_exact(s: &Settings) -> Result<String> {
    let setup = model_setup(s, false)?;
    let grid = exact_grid(s)?;
    let mut table = Table::new(&["t", "observable", "value", "log_norm"]);
    let mut state = setup.initial.clone();
    let mut log_norm = 0.0;
    let prop = if grid.len() > 1 { Some(Propagator::new(&setup.hamiltonian, grid[1] - grid[0])?) } else { None };
    for (i, &t) in grid.iter().enumerate() {
        if i > 0 {
            let r = prop.as_ref().expect("grid has a step").apply(&state)?;
            state = r.state;
            log_norm += r.log_norm;
        }
        for o in &setup.observables {
            table.row(&[num(t), o.name.clone(), num(o.observable.evaluate(&state)?), num(log_norm)]);
        }
    }
    Ok(table.finish())
}

/// One `run-vqs` trajectory and everything written for it.
#[derive(Debug)]
pub struct VqsRun {
    pub model: String,
    pub csv: String,
    pub replay_csv: Option<String>,
    pub summary: Value,
}

fn trace_csv(trace: &VqsTrace) -> String {
    let mut table = Table::new(&["t", "observable", "value", "loss", "iterations", "log_norm"]);
    for step in &trace.steps {
        for (name, value) in &step.observables {
            table.row(&[
                num(step.t),
                name.clone(),
                num(*value),
                num(step.loss),
                step.iterations.to_string(),
                num(step.log_norm_cumulative),
            ]);
        }
    }
    table.finish()
}

fn replay_csv(s: &Settings, setup: &ModelSetup, trace: &VqsTrace, cfg_ansatz: lchs_vqs_core::circuit::AnsatzSpec) -> Result<String> {
    let shots: u64 = s.count("replay.shots")?;
    let reps: usize = s.count("replay.reps")?;
    let p = s.real("replay.readout_p")?;
    let noise = if p > 0.0 {
        let model = invalid(ReadoutNoiseModel::symmetric(setup.n_qubits(), p))?;
        Some(ReplayNoise { calibration: model.confusion(), model })
    } else {
        None
    };
    let seed = s.seed()?;
    let mut table = Table::new(&["t", "observable", "reference", "mean", "std", "min_bias"]);
    let diagonal = diagonal_observables(setup);
    let mut per_obs = Vec::new();
    for (i, (_, op)) in diagonal.iter().enumerate() {
        per_obs.push(sampled_replay(trace, cfg_ansatz, op, shots, reps, seed.wrapping_add(i as u64), noise.as_ref())?);
    }
    for step in 0..trace.steps.len() {
        for ((name, _), pts) in diagonal.iter().zip(&per_obs) {
            let p = &pts[step];
            table.row(&[num(p.t), name.to_string(), num(p.reference), num(p.mean), num(p.std), num(p.min_bias)]);
        }
    }
    Ok(table.finish())
}

fn run_one(s: &Settings, dual: bool) -> Result<VqsRun> {
    let setup = model_setup(s, dual)?;
    let cfg = vqs_config(s, &setup)?;
    let ansatz = cfg.ansatz;
    let engine = VqsEngine::new(cfg)?;
    let trace = engine.run_evolution(&setup.initial, &setup.observables)?;
    let replay = if s.flag("replay.enabled")? { Some(replay_csv(s, &setup, &trace, ansatz)?) } else { None };
    let unconverged: Vec<f64> = trace.steps.iter().filter(|st| !st.converged).map(|st| st.t).collect();
    let last = trace.steps.last().expect("trace has theta_0");
    let summary = json!({
        "model": setup.name,
        "n_qubits": setup.n_qubits(),
        "parameters": ansatz.parameter_count(),
        "steps": trace.steps.len() - 1,
        "all_converged": unconverged.is_empty(),
        "unconverged_times": unconverged,
        "max_loss": trace.steps.iter().map(|st| st.loss).fold(0.0, f64::max),
        "total_iterations": trace.steps.iter().map(|st| st.iterations).sum::<usize>(),
        "final_log_norm": last.log_norm_cumulative,
        "penalty_targets": engine.config().penalty_observables.iter().map(|(_, t)| *t).collect::<Vec<_>>(),
    });
    Ok(VqsRun { model: setup.name, csv: trace_csv(&trace), replay_csv: replay, summary })
}

/// Runs the configured model and, with `model.with_dual`, its particle-hole
/// partner.
pub fn run_vqs(s: &Settings) -> Result<Vec<VqsRun>> {
    // Validate both configurations before any compute.
    let with_dual = s.flag("model.with_dual")?;
    if with_dual && s.get("model") != "hatano-nelson" {
        return Err(CliError::config("model.with_dual needs model = hatano-nelson"));
    }
    if s.flag("replay.enabled")? && s.count::<u64>("replay.shots")? == 0 {
        return Err(CliError::config("replay.shots must be positive"));
    }
    let duals: &[bool] = if with_dual { &[false, true] } else { &[false] };
    for &d in duals {
        let setup = model_setup(s, d)?;
        vqs_config(s, &setup)?;
        if s.flag("replay.enabled")? && diagonal_observables(&setup).is_empty() {
            return Err(CliError::config(format!("model {} has no diagonal observable to replay", setup.name)));
        }
    }
    duals.iter().map(|&d| run_one(s, d)).collect()
}

/// `dir/stem-suffix.ext` next to `path`.
pub fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

pub fn manifest(s: &Settings, command: &str, runs: &[(String, Value)]) -> Result<String> {
    let config: Map<String, Value> = s.iter().map(|(k, v)| (k.to_string(), Value::String(v.to_string()))).collect();
    let seed = s.seed()?;
    let doc = json!({
        "command": command,
        "versions": {
            "lchs-vqs": env!("CARGO_PKG_VERSION"),
            "lchs-vqs-core": lchs_vqs_core::VERSION,
        },
        "seeds": { "optimizer": seed, "replay": seed },
        "config": config,
        "runs": runs.iter().map(|(path, summary)| {
            let mut v = summary.clone();
            v["csv"] = Value::String(path.clone());
            v
        }).collect::<Vec<_>>(),
    });
    Ok(serde_json::to_string_pretty(&doc).expect("json serialization") + "\n")
}

/// Reference and rewritten controlled-pair circuits for a gate list bound at
/// `theta` (ancilla branch 0) and `theta_m` (branch 1), optionally followed
/// by the controlled `U_k` composite for `generator`.
#[derive(Debug)]
pub struct SimplifyOutput {
    pub reference: Circuit,
    pub simplified: Circuit,
    pub summary: String,
    pub equivalent: Option<bool>,
}

pub const EQUIVALENCE_TOL: f64 = 1e-10;

fn describe(label: &str, c: &Circuit) -> String {
    let counts: Vec<String> = c.gate_counts().iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!(
        "{label}: {} gates, depth {}, multi-qubit {}, widest {} qubits [{}]\n",
        c.len(),
        c.depth(),
        c.multi_qubit_count(),
        c.max_arity(),
        counts.join(" ")
    )
}

pub fn simplify(
    template: &ParamCircuit,
    theta: &[f64],
    theta_m: &[f64],
    uk: Option<(&PauliSum, f64)>,
) -> Result<SimplifyOutput> {
    let a = invalid(template.bind(theta))?;
    let b = invalid(template.bind(theta_m))?;
    let n = a.n_qubits();
    let mut reference = invalid(pair_product(&a, &b))?;
    let mut simplified = invalid(simplify_pair(&a, &b))?;
    if let Some((g, dt)) = uk {
        if g.n_qubits() != n {
            return Err(CliError::config(format!("generator acts on {} qubits, circuit on {n}", g.n_qubits())));
        }
        let product = pair_product(&trotter_circuit(g, dt)?, &trotter_circuit(g, 2.0 * dt)?)?;
        simplified.append(&simplify_pair_pass(&product, n)?)?;
        reference.append(&product)?;
    }
    let mut summary = describe("reference", &reference);
    summary.push_str(&describe("simplified", &simplified));
    summary.push_str(&format!(
        "delta: gates {:+}, depth {:+}, multi-qubit {:+}\n",
        simplified.len() as i64 - reference.len() as i64,
        simplified.depth() as i64 - reference.depth() as i64,
        simplified.multi_qubit_count() as i64 - reference.multi_qubit_count() as i64,
    ));
    let equivalent = match (reference.to_unitary(), simplified.to_unitary()) {
        (Ok(r), Ok(s)) => {
            let d = max_abs_diff(&r, &s);
            let ok = d <= EQUIVALENCE_TOL;
            let verdict = if ok { "equivalent" } else { "NOT equivalent" };
            summary.push_str(&format!("verdict: {verdict}, max deviation {d:.3e} (tolerance {EQUIVALENCE_TOL:e})\n"));
            Some(ok)
        }
        _ => {
            summary.push_str("verdict: not checked (register too wide for dense comparison)\n");
            None
        }
    };
    Ok(SimplifyOutput { reference, simplified, summary, equivalent })
}

/// Mitigated expectations of diagonal observables as CSV.
pub fn mitigate_counts(counts: &Counts, cal: &CalibrationMatrix, observables: &[(String, PauliSum)]) -> Result<String> {
    if cal.n_qubits() != counts.n_qubits() {
        return Err(CliError::config(format!(
            "calibration covers {} qubits, counts have {}",
            cal.n_qubits(),
            counts.n_qubits()
        )));
    }
    let m = mitigate(counts, cal)?;
    let raw = counts.frequencies();
    let mut table = Table::new(&["observable", "raw", "mitigated", "quasi", "std_error", "clip_magnitude"]);
    for (name, op) in observables {
        if op.n_qubits() != counts.n_qubits() {
            return Err(CliError::config(format!("observable {name} acts on {} qubits", op.n_qubits())));
        }
        let diag = invalid(diagonal_of(op))?;
        let raw_value: f64 = raw.iter().zip(&diag).map(|(p, o)| p * o).sum();
        table.row(&[
            name.clone(),
            num(raw_value),
            num(m.expectation(op)?),
            num(m.quasi_expectation(op)?),
            num(m.standard_error(op)?),
            num(m.clip_magnitude),
        ]);
    }
    Ok(table.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use lchs_vqs_core::statevec::{basis_state, StateVector};

    #[test]
    fn projector_expansion_matches_basis_probability() {
        let psi = StateVector::random(3, 5).unwrap();
        for idx in 0..8 {
            let p = basis_projector(3, idx).unwrap();
            let want = psi.amplitudes()[idx].norm_sqr();
            assert!((psi.expectation(&p).unwrap() - want).abs() < 1e-12);
        }
        let b = basis_state(2, "10").unwrap();
        assert!((b.expectation(&basis_projector(2, 2).unwrap()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn numbers_print_without_negative_zero() {
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(0.25), "0.25");
    }
}
