//! Flat `key = value` run configuration with dotted keys.
//!
//! A file may start from a bundled preset with `preset = <name>`; later
//! lines, and then `--set` overrides, replace individual keys. Every key has
//! a default, so the resolved table doubles as the manifest echo.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lchs_vqs_core::circuit::AnsatzSpec;
use lchs_vqs_core::lchs::{build_quadrature, NodeMode, Quadrature};
use lchs_vqs_core::models::{
    hn_initial_state, observables_for, particle_number, DualForm, HatanoNelsonSpec, IsingSpec, Model, ObservableSpec,
    SshSpec,
};
use lchs_vqs_core::pauli::PauliSum;
use lchs_vqs_core::statevec::{basis_state, Observable, StateVector};
use lchs_vqs_core::vqs::{GradientMethod, LossBackend, LossNormalization, VqsConfig};

use crate::error::{invalid, CliError, Result};
use crate::formats::{parse_operator, parse_real, read_file};

/// Known keys with their defaults. `auto` defers to the model.
const KEYS: &[(&str, &str)] = &[
    ("model", "ising"),
    ("model.n", "auto"),
    ("model.j", "1"),
    ("model.g_r", "2"),
    ("model.g_i", "0.5"),
    ("model.g", "1"),
    ("model.u", "1"),
    ("model.dual_form", "exact"),
    ("model.with_dual", "false"),
    ("model.v", "0.3"),
    ("model.r", "1"),
    ("model.gamma", "3.5"),
    ("model.k", "0.3pi"),
    ("model.operator", ""),
    ("model.initial", "auto"),
    ("lchs.k_max", "80"),
    ("lchs.dk", "1"),
    ("vqs.dt", "0.1"),
    ("vqs.total_time", "5"),
    ("vqs.layers", "5"),
    ("vqs.backend", "direct-expm"),
    ("vqs.trotter_steps", "0"),
    ("vqs.penalty_coeff", "1"),
    ("vqs.penalty_target", "auto"),
    ("vqs.convergence_threshold", "0.01"),
    ("vqs.target_loss", "auto"),
    ("vqs.shots", "20000"),
    ("vqs.max_iters", "200"),
    ("vqs.gradient", "auto"),
    ("vqs.fd_step", "1e-6"),
    ("vqs.normalization", "normalized"),
    ("vqs.jitter", "0.01"),
    ("vqs.restarts", "4"),
    ("bench.pairs", "80:1"),
    ("bench.t_max", "1.5"),
    ("bench.dt", "0.05"),
    ("bench.observable", "auto"),
    ("exact.t_max", "auto"),
    ("exact.dt", "auto"),
    ("replay.enabled", "false"),
    ("replay.shots", "20000"),
    ("replay.reps", "50"),
    ("replay.readout_p", "0"),
    ("seed", "0"),
    ("output.csv", ""),
    ("output.manifest", ""),
];

pub const PRESETS: &[&str] = &["ising-fig2", "hn-fig3", "ssh-figs1"];

fn preset(name: &str) -> Option<&'static [(&'static str, &'static str)]> {
    Some(match name {
        "ising-fig2" => &[
            ("model", "ising"),
            ("model.n", "6"),
            ("model.j", "1"),
            ("model.g_r", "2"),
            ("model.g_i", "0.5"),
            ("lchs.k_max", "80"),
            ("lchs.dk", "1"),
            ("vqs.dt", "0.1"),
            ("vqs.total_time", "5"),
            ("vqs.layers", "5"),
            ("vqs.backend", "direct-expm"),
            ("vqs.gradient", "adjoint"),
            ("vqs.target_loss", "1e-7"),
            ("vqs.max_iters", "400"),
            ("seed", "11"),
        ],
        "hn-fig3" => &[
            ("model", "hatano-nelson"),
            ("model.n", "10"),
            ("model.g", "1"),
            ("model.u", "1"),
            ("model.with_dual", "true"),
            ("lchs.k_max", "100"),
            ("lchs.dk", "0.5"),
            ("vqs.dt", "0.2"),
            ("vqs.total_time", "4"),
            ("vqs.layers", "10"),
            ("vqs.backend", "direct-expm"),
            ("vqs.gradient", "adjoint"),
            ("vqs.penalty_coeff", "1"),
            ("vqs.penalty_target", "auto"),
            ("vqs.target_loss", "1e-6"),
            ("vqs.max_iters", "1500"),
            ("seed", "23"),
        ],
        "ssh-figs1" => &[
            ("model", "ssh"),
            ("model.v", "0.3"),
            ("model.r", "1"),
            ("model.gamma", "3.5"),
            ("model.k", "0.3pi"),
            ("bench.pairs", "40:1, 80:2, 80:1"),
            ("bench.t_max", "1.5"),
            ("bench.dt", "0.05"),
            ("lchs.k_max", "80"),
            ("lchs.dk", "1"),
            ("vqs.dt", "0.05"),
            ("vqs.total_time", "1.5"),
            ("vqs.layers", "1"),
            ("vqs.backend", "lchs-sum"),
        ],
        _ => return None,
    })
}

/// Resolved key table.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
    /// Directory that relative file paths in values are resolved against.
    base_dir: PathBuf,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        if key == "preset" {
            return self.apply_preset(value);
        }
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(CliError::config(format!("unknown key `{key}`"))),
        }
    }

    pub fn apply_preset(&mut self, name: &str) -> Result<()> {
        let entries = preset(name)
            .ok_or_else(|| CliError::config(format!("unknown preset `{name}` (known: {})", PRESETS.join(", "))))?;
        for (k, v) in entries {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Applies `key = value` lines in order.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| CliError::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: "expected `key = value`".into(),
            })?;
            self.set(k, v).map_err(|e| CliError::Parse { path: origin.to_string(), line: i + 1, message: e.to_string() })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = read_file(path)?;
        if let Some(dir) = path.parent() {
            self.base_dir = dir.to_path_buf();
        }
        self.apply_text(&text, &path.display().to_string())
    }

    /// `key=value` override from the command line.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (k, v) = spec.split_once('=').ok_or_else(|| CliError::config(format!("override `{spec}` is not key=value")))?;
        self.set(k, v)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("unregistered key {key}"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn is_auto(&self, key: &str) -> bool {
        self.get(key) == "auto"
    }

    pub fn real(&self, key: &str) -> Result<f64> {
        parse_real(self.get(key)).ok_or_else(|| CliError::config(format!("`{key}` = `{}` is not a number", self.get(key))))
    }

    pub fn count<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)
            .parse()
            .map_err(|_| CliError::config(format!("`{key}` = `{}` is not a non-negative integer", self.get(key))))
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(CliError::config(format!("`{key}` = `{other}` is not a boolean"))),
        }
    }

    /// Path value resolved against the config file's directory; `None` when
    /// empty.
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.get(key);
        (!v.is_empty()).then(|| {
            let p = PathBuf::from(v);
            if p.is_absolute() { p } else { self.base_dir.join(p) }
        })
    }

    pub fn seed(&self) -> Result<u64> {
        self.count("seed")
    }
}

/// A model instance ready to simulate.
#[derive(Clone, Debug)]
pub struct ModelSetup {
    pub name: String,
    pub hamiltonian: PauliSum,
    pub initial: StateVector,
    pub observables: Vec<ObservableSpec>,
    /// Conserved quantity for the penalty term, with its value on the
    /// initial state.
    pub conserved: Option<(PauliSum, f64)>,
}

impl ModelSetup {
    pub fn n_qubits(&self) -> usize {
        self.hamiltonian.n_qubits()
    }
}

fn named_model(s: &Settings, name: &str) -> Result<Model> {
    let mut model = invalid(Model::by_name(name))?;
    let n = if s.is_auto("model.n") { None } else { Some(s.count::<usize>("model.n")?) };
    match &mut model {
        Model::Ising(spec) => {
            *spec = IsingSpec::new(n.unwrap_or(spec.n), s.real("model.j")?, s.real("model.g_r")?, s.real("model.g_i")?);
        }
        Model::HatanoNelson(spec) => {
            let dual_form = match s.get("model.dual_form") {
                "exact" => DualForm::Exact,
                "swap-only" => DualForm::SwapOnly,
                other => return Err(CliError::config(format!("model.dual_form `{other}` is not exact|swap-only"))),
            };
            *spec = HatanoNelsonSpec {
                n: n.unwrap_or(spec.n),
                g: s.real("model.g")?,
                u: s.real("model.u")?,
                dual: spec.dual,
                dual_form,
            };
        }
        Model::Ssh(spec) => {
            if n.is_some_and(|n| n != 1) {
                return Err(CliError::config("the SSH model has one qubit"));
            }
            *spec = SshSpec { v: s.real("model.v")?, r: s.real("model.r")?, gamma: s.real("model.gamma")?, k: s.real("model.k")? };
        }
    }
    Ok(model)
}

/// Builds the configured model, or its particle-hole partner when `dual` is
/// set (Hatano-Nelson only).
pub fn model_setup(s: &Settings, dual: bool) -> Result<ModelSetup> {
    let name = s.get("model").to_string();
    let (name, hamiltonian, default_initial, observables, conserved_op) = if name == "custom" {
        let path = s.path("model.operator").ok_or_else(|| CliError::config("model = custom needs model.operator"))?;
        let h = parse_operator(&read_file(&path)?, &path.display().to_string())?;
        let n = h.n_qubits();
        let zero = invalid(StateVector::zero(n))?;
        let obs = vec![
            ObservableSpec::new("S_z", Observable::Pauli(invalid(lchs_vqs_core::models::magnetization(n))?)),
            ObservableSpec::new("P0", Observable::Projector(zero.clone())),
        ];
        (name, h, zero, obs, None)
    } else {
        let base = if dual && name == "hatano-nelson" { "hatano-nelson-dual" } else { name.as_str() };
        if dual && base != "hatano-nelson-dual" {
            return Err(CliError::config(format!("model `{name}` has no dual partner")));
        }
        let model = named_model(s, base)?;
        let initial = match model {
            Model::HatanoNelson(spec) => invalid(hn_initial_state(&spec))?,
            _ => invalid(model.initial_state())?,
        };
        let conserved = match model {
            Model::HatanoNelson(spec) => Some(invalid(particle_number(spec.n))?),
            _ => None,
        };
        (model.name().to_string(), invalid(model.hamiltonian())?, initial, invalid(observables_for(&model))?, conserved)
    };
    let n = hamiltonian.n_qubits();
    let initial = match s.get("model.initial") {
        "auto" => default_initial,
        bits => invalid(basis_state(n, bits))?,
    };
    let conserved = match conserved_op {
        Some(op) => {
            let v = invalid(initial.expectation(&op))?;
            Some((op, v))
        }
        None => None,
    };
    Ok(ModelSetup { name, hamiltonian, initial, observables, conserved })
}

pub fn quadrature(s: &Settings) -> Result<Quadrature> {
    invalid(build_quadrature(s.real("lchs.k_max")?, s.real("lchs.dk")?))
}

/// `(K, dk)` pairs from `bench.pairs`, e.g. `40:1, 80:2`.
pub fn bench_pairs(s: &Settings) -> Result<Vec<(f64, f64)>> {
    let text = s.get("bench.pairs");
    text.split([',', ';'])
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (k, dk) = p.split_once(':').ok_or_else(|| CliError::config(format!("bench pair `{p}` is not K:dk")))?;
            match (parse_real(k), parse_real(dk)) {
                (Some(k), Some(dk)) => Ok((k, dk)),
                _ => Err(CliError::config(format!("bench pair `{p}` is not numeric"))),
            }
        })
        .collect()
}

/// Uniform grid `0, dt, ..., t_max` (the endpoint included when it lies on
/// the grid up to 1e-9).
pub fn time_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t_max >= 0.0) || !(dt > 0.0) {
        return Err(CliError::config(format!("time grid needs t_max >= 0 and dt > 0 (got {t_max}, {dt})")));
    }
    let steps = (t_max / dt + 1e-9).floor() as usize;
    Ok((0..=steps).map(|i| i as f64 * dt).collect())
}

pub fn vqs_config(s: &Settings, setup: &ModelSetup) -> Result<VqsConfig> {
    let n = setup.n_qubits();
    let ansatz = AnsatzSpec::new(n, s.count("vqs.layers")?);
    let mut cfg = invalid(VqsConfig::new(setup.hamiltonian.clone(), ansatz, s.real("vqs.dt")?, s.real("vqs.total_time")?))?;
    cfg.quadrature = quadrature(s)?;
    cfg.backend = match s.get("vqs.backend") {
        "direct-expm" => LossBackend::DirectExpm,
        "lchs-sum" => {
            let steps: usize = s.count("vqs.trotter_steps")?;
            LossBackend::LchsSum { mode: if steps == 0 { NodeMode::Exact } else { NodeMode::Trotter { steps } } }
        }
        "sampled-circuit" => LossBackend::SampledCircuit,
        other => {
            return Err(CliError::config(format!("vqs.backend `{other}` is not direct-expm|lchs-sum|sampled-circuit")))
        }
    };
    cfg.gradient = match s.get("vqs.gradient") {
        "auto" => GradientMethod::Auto,
        "finite-difference" => GradientMethod::FiniteDifference,
        "parameter-shift" => GradientMethod::ParameterShift,
        "adjoint" => GradientMethod::Adjoint,
        other => return Err(CliError::config(format!("vqs.gradient `{other}` is not recognised"))),
    };
    cfg.normalization = match s.get("vqs.normalization") {
        "normalized" => LossNormalization::Normalized,
        "raw" => LossNormalization::Raw,
        other => return Err(CliError::config(format!("vqs.normalization `{other}` is not normalized|raw"))),
    };
    cfg.penalty_coeff = s.real("vqs.penalty_coeff")?;
    cfg.penalty_observables = match (s.get("vqs.penalty_target"), &setup.conserved) {
        ("none", _) | ("auto", None) => Vec::new(),
        ("auto", Some((op, v))) => vec![(op.clone(), *v)],
        (_, Some((op, _))) => vec![(op.clone(), s.real("vqs.penalty_target")?)],
        (t, None) => return Err(CliError::config(format!("model {} has no conserved quantity for target {t}", setup.name))),
    };
    cfg.convergence_threshold = s.real("vqs.convergence_threshold")?;
    cfg.target_loss = if s.is_auto("vqs.target_loss") { None } else { Some(s.real("vqs.target_loss")?) };
    let shots: u64 = s.count("vqs.shots")?;
    cfg.shots = (shots > 0).then_some(shots);
    cfg.max_iters = s.count("vqs.max_iters")?;
    cfg.fd_step = s.real("vqs.fd_step")?;
    cfg.jitter = s.real("vqs.jitter")?;
    cfg.restarts = s.count("vqs.restarts")?;
    cfg.seed = s.seed()?;
    invalid(cfg.validate())?;
    Ok(cfg)
}

/// Output grid for `evolve-exact`; defaults to the VQS grid.
pub fn exact_grid(s: &Settings) -> Result<Vec<f64>> {
    let t_max = if s.is_auto("exact.t_max") { s.real("vqs.total_time")? } else { s.real("exact.t_max")? };
    let dt = if s.is_auto("exact.dt") { s.real("vqs.dt")? } else { s.real("exact.dt")? };
    time_grid(t_max, dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_every_key() {
        let s = Settings::default();
        assert_eq!(s.iter().count(), KEYS.len());
        assert_eq!(s.get("vqs.convergence_threshold"), "0.01");
    }

    #[test]
    fn text_overrides_and_presets() {
        let mut s = Settings::default();
        s.apply_text("preset = hn-fig3\n# comment\nvqs.dt = 0.1  # trailing\n", "cfg").unwrap();
        assert_eq!(s.get("model"), "hatano-nelson");
        assert_eq!(s.real("vqs.dt").unwrap(), 0.1);
        assert!(matches!(s.apply_text("nope = 1\n", "cfg"), Err(CliError::Parse { line: 1, .. })));
        assert!(s.apply_text("vqs.dt 0.1\n", "cfg").is_err());
        assert!(s.apply_preset("fig9").is_err());
        for p in PRESETS {
            Settings::default().apply_preset(p).unwrap();
        }
    }

    #[test]
    fn presets_build_valid_configs() {
        for p in PRESETS {
            let mut s = Settings::default();
            s.apply_preset(p).unwrap();
            let setup = model_setup(&s, false).unwrap();
            vqs_config(&s, &setup).unwrap();
        }
    }

    #[test]
    fn hn_penalty_target_follows_filling() {
        let mut s = Settings::default();
        s.apply_preset("hn-fig3").unwrap();
        let p = vqs_config(&s, &model_setup(&s, false).unwrap()).unwrap();
        let d = vqs_config(&s, &model_setup(&s, true).unwrap()).unwrap();
        assert!((p.penalty_observables[0].1 - 2.0).abs() < 1e-12);
        assert!((d.penalty_observables[0].1 - 8.0).abs() < 1e-12);
        assert_eq!(p.ansatz.parameter_count(), 300);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut s = Settings::default();
        s.set("vqs.dt", "0.3").unwrap();
        let setup = model_setup(&s, false).unwrap();
        assert!(matches!(vqs_config(&s, &setup), Err(CliError::Config(_))));
        s.set("vqs.dt", "x").unwrap();
        assert!(matches!(vqs_config(&s, &setup), Err(CliError::Config(_))));
        s.set("model", "ising").unwrap();
        assert!(model_setup(&s, true).is_err());
        s.set("model", "heisenberg").unwrap();
        assert!(matches!(model_setup(&s, false), Err(CliError::Config(_))));
    }

    #[test]
    fn pairs_and_grids() {
        let mut s = Settings::default();
        s.set("bench.pairs", "40:1, 80:2;80:1").unwrap();
        assert_eq!(bench_pairs(&s).unwrap(), vec![(40.0, 1.0), (80.0, 2.0), (80.0, 1.0)]);
        s.set("bench.pairs", "").unwrap();
        assert!(bench_pairs(&s).unwrap().is_empty());
        assert_eq!(time_grid(0.0, 0.1).unwrap(), vec![0.0]);
        assert_eq!(time_grid(1.5, 0.05).unwrap().len(), 31);
        assert!(time_grid(1.0, 0.0).is_err());
    }
}
