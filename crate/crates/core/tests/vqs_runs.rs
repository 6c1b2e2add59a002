use lchs_vqs_core::circuit::AnsatzSpec;
use lchs_vqs_core::models::{hn_hamiltonian, hn_initial_state, observables_for, particle_number, HatanoNelsonSpec, Model};
use lchs_vqs_core::vqs::{GradientMethod, VqsConfig, VqsEngine, VqsTrace};

fn hn_run(n: usize, penalty: f64) -> VqsTrace {
    let spec = HatanoNelsonSpec::new(n, 1.0, 1.0, false);
    let mut cfg = VqsConfig::new(hn_hamiltonian(&spec).unwrap(), AnsatzSpec::new(n, 2), 0.2, 1.6).unwrap();
    cfg.gradient = GradientMethod::Adjoint;
    cfg.penalty_coeff = penalty;
    cfg.penalty_observables = vec![(particle_number(n).unwrap(), 2.0)];
    cfg.max_iters = 150;
    cfg.seed = 3;
    let obs = observables_for(&Model::HatanoNelson(spec)).unwrap();
    VqsEngine::new(cfg).unwrap().run_evolution(&hn_initial_state(&spec).unwrap(), &obs).unwrap()
}

fn max_n_drift(trace: &VqsTrace) -> f64 {
    trace.series("N").iter().map(|v| (v - 2.0).abs()).fold(0.0, f64::max)
}

#[test]
fn penalty_holds_particle_number_at_least_as_well() {
    let with = hn_run(4, 1.0);
    let without = hn_run(4, 0.0);
    assert!(max_n_drift(&with) <= max_n_drift(&without), "{} vs {}", max_n_drift(&with), max_n_drift(&without));
    assert_eq!(with.steps.len(), 9);
}

#[test]
fn runs_are_reproducible() {
    let a = hn_run(4, 1.0);
    let b = hn_run(4, 1.0);
    for (x, y) in a.steps.iter().zip(&b.steps) {
        assert_eq!(x.theta, y.theta);
        assert_eq!(x.log_norm_cumulative, y.log_norm_cumulative);
    }
}

#[test]
fn log_norm_accumulates_step_increments() {
    let trace = hn_run(4, 1.0);
    let mut sum = 0.0;
    for s in &trace.steps {
        sum += s.log_norm_increment;
        assert!((s.log_norm_cumulative - sum).abs() < 1e-12);
    }
}
