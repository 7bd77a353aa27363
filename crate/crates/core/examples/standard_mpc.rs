//! Output-tracking FCS-MPC on the amplifier: penalise the current error and
//! the switching effort, start from rest and report the steady state.
//!
//! ```text
//! cargo run --example standard_mpc [N]
//! ```

use fcs_mpc::model::{build_amplifier, zoh_discretize, AmplifierParams};
use fcs_mpc::mpc::{MpcProblem, MpcWeights, SolverChoice, TrackingReference};
use fcs_mpc::numerics::{Matrix, Vector};
use fcs_mpc::sim::{simulate, steady_state_report, ReportOptions, SteadyStateReport};

pub fn run_example(horizon: usize) -> fcs_mpc::Result<SteadyStateReport> {
    let sys = zoh_discretize(&build_amplifier(&AmplifierParams::industrial())?, 400e3)?;
    let weights = MpcWeights::new(Matrix::identity(1, 1), Matrix::identity(2, 2) * 1e-4, Matrix::identity(1, 1))?;
    let reference = TrackingReference::ConstantOutput(Vector::from_element(1, 6.0));
    let prob = MpcProblem::new(sys, horizon, weights, reference)?;
    let traj = simulate(&prob, &Vector::zeros(5), 2000, SolverChoice::BranchAndBound)?;
    let report = steady_state_report(&traj, None, &ReportOptions::default())?;
    println!("N = {horizon}, 2000 steps");
    println!("  ripple      {:.4} mA", report.ripple[0] * 1e3);
    println!("  mean i_o    {:.5} A", report.mean_output[0]);
    println!("  overshoot   {:.2} mA", report.overshoot[0] * 1e3);
    println!("  mode cycle  {:?}", report.mode_cycle);
    println!("  leaves/step {:.1} of {}", report.mean_nodes_explored, 4usize.pow(horizon as u32));
    Ok(report)
}

#[allow(dead_code)]
fn main() -> fcs_mpc::Result<()> {
    let horizon = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    run_example(horizon).map(|_| ())
}
