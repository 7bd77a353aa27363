//! Every runnable example doubles as a smoke test of the capability it
//! demonstrates.

#[path = "../examples/discretize_amplifier.rs"]
mod discretize_amplifier;
#[path = "../examples/limit_cycle_search.rs"]
mod limit_cycle_search;
#[path = "../examples/terminal_weight.rs"]
mod terminal_weight;
#[path = "../examples/standard_mpc.rs"]
mod standard_mpc;
#[path = "../examples/limit_cycle_mpc.rs"]
mod limit_cycle_mpc;
#[path = "../examples/solver_comparison.rs"]
mod solver_comparison;
#[path = "../examples/cost_decrease.rs"]
mod cost_decrease;
#[path = "../examples/run_config.rs"]
mod run_config;

use fcs_mpc::sim::is_rotation_of;

#[test]
fn discretized_amplifier_is_marginally_stable() {
    let rho = discretize_amplifier::run_example().unwrap();
    assert!(rho < 1.0 && rho > 0.99999);
}

#[test]
fn searched_cycle_uses_the_expected_modes() {
    let cycle = limit_cycle_search::run_example().unwrap();
    assert!(is_rotation_of(&cycle.modes().unwrap(), &[3, 2, 3, 1, 1, 1]));
}

#[test]
fn computed_terminal_weight_is_certified_and_diagonal_one_is_not() {
    let (computed, tuned) = terminal_weight::run_example().unwrap();
    assert!(computed.valid);
    assert!(!tuned.valid);
}

#[test]
fn standard_controller_settles_into_a_single_pulse_pattern() {
    let report = standard_mpc::run_example(3).unwrap();
    assert!(is_rotation_of(report.mode_cycle.as_deref().unwrap(), &[3, 1, 1, 1, 1, 1]));
    assert!((report.mean_output[0] - 6.0).abs() < 0.01);
}

#[test]
fn cycle_controller_reproduces_the_reference_modes() {
    let report = limit_cycle_mpc::run_example(6).unwrap();
    assert!(is_rotation_of(report.mode_cycle.as_deref().unwrap(), &[3, 2, 3, 1, 1, 1]));
}

#[test]
fn branch_and_bound_visits_fewer_leaves() {
    let (exhaustive, bnb) = solver_comparison::run_example().unwrap();
    assert!(bnb < exhaustive);
}

#[test]
fn certified_terminal_weight_gives_monotone_cost_and_convergence() {
    let (report, converged) = cost_decrease::run_example().unwrap();
    assert_eq!(report.monotone_after, Some(0));
    assert!(converged.is_some());
}

#[test]
fn bundled_configuration_writes_its_artifacts() {
    let out = tempfile::tempdir().unwrap();
    let config = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/limit_cycle_mpc_n4.json");
    let outcome = run_config::run_example(&config, out.path()).unwrap();
    assert_eq!(outcome.trajectory.steps(), 2000);
    for name in ["discrete_system.json", "terminal_cost.json", "trajectory.csv", "report.json"] {
        assert!(out.path().join(name).is_file(), "{name} missing");
    }
}
