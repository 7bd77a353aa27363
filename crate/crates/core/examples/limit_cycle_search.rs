//! Searches the 6-periodic binary input sequence whose steady-state output
//! current stays closest to 6 A, and prints it as operation modes together
//! with its state cycle and output ripple.
//!
//! ```text
//! cargo run --example limit_cycle_search
//! ```

use fcs_mpc::limit_cycle::{cycle_cost, cycle_ripple, optimal_limit_cycle, CycleCriterion, CycleNorm, LimitCycle};
use fcs_mpc::model::{build_amplifier, zoh_discretize, AmplifierParams};
use fcs_mpc::numerics::{Matrix, Vector};

pub fn run_example() -> fcs_mpc::Result<LimitCycle> {
    let sys = zoh_discretize(&build_amplifier(&AmplifierParams::industrial())?, 400e3)?;
    let criterion = CycleCriterion::new(Vector::from_element(1, 6.0), Matrix::identity(1, 1), CycleNorm::TwoNorm)?;
    let cycle = optimal_limit_cycle(&sys, &criterion, 6)?;
    println!("candidate #{} of {}", cycle.index(), 4u32.pow(6));
    println!("modes:   {:?}", cycle.modes()?);
    println!("cost:    {:.6e}", cycle_cost(&cycle, &criterion, &sys.c)?);
    println!("ripple:  {:.4} mA", cycle_ripple(&cycle, &sys.c)[0] * 1e3);
    println!("periodicity residual: {:.2e}", cycle.certificate_residual());
    println!("phase      i_Lp      v_Cp      i_Ln      v_Cn       i_o");
    for (phase, x) in cycle.states().iter().enumerate() {
        println!("{phase:>5} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}", x[0], x[1], x[2], x[3], x[4]);
    }
    let mut csv = Vec::new();
    cycle.write_csv(&sys, &mut csv)?;
    println!("\n{}", String::from_utf8_lossy(&csv));
    Ok(cycle)
}

#[allow(dead_code)]
fn main() -> fcs_mpc::Result<()> {
    run_example().map(|_| ())
}
