//! Branch-and-bound against plain enumeration on random plants: both return
//! the same sequence and cost, branch-and-bound with far fewer leaves.
//!
//! ```text
//! cargo run --example solver_comparison
//! ```

use fcs_mpc::limit_cycle::cycle_from_inputs;
use fcs_mpc::model::{DiscreteSystem, InputVector};
use fcs_mpc::mpc::{solve_branch_and_bound, solve_exhaustive, MpcProblem, MpcWeights, TrackingReference};
use fcs_mpc::numerics::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> fcs_mpc::Result<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut exhaustive_leaves, mut bnb_leaves) = (0, 0);
    println!("{:>3} {:>3} {:>3} {:>10} {:>10} {:>14}", "n", "m", "N", "all", "bnb", "cost");
    for _ in 0..10 {
        let (n, m, horizon) = (rng.gen_range(2..=5), rng.gen_range(1..=2), rng.gen_range(3..=6));
        let sys = loop {
            let a = Matrix::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5));
            let b = Matrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
            let sys = DiscreteSystem::new(a, b, Matrix::from_fn(1, n, |_, _| rng.gen_range(-1.0..1.0)), 1.0)?;
            if sys.spectral_radius()? < 0.95 {
                break sys;
            }
        };
        let inputs: Vec<InputVector> = (0..3).map(|_| InputVector::from_code(rng.gen_range(0..1 << m), m)).collect();
        let cycle = cycle_from_inputs(&sys, &inputs)?;
        let weights = MpcWeights::new(Matrix::identity(n, n), Matrix::identity(m, m) * 0.1, Matrix::identity(n, n) * 10.0)?;
        let prob = MpcProblem::new(sys, horizon, weights, TrackingReference::Cycle(cycle))?;
        let x = Vector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let zeros = InputVector::zeros(m);
        let all = solve_exhaustive(&prob, &x, 0, &zeros)?;
        let bnb = solve_branch_and_bound(&prob, &x, 0, &zeros)?;
        assert_eq!(all.inputs, bnb.inputs);
        assert_eq!(all.cost.to_bits(), bnb.cost.to_bits());
        println!("{n:>3} {m:>3} {horizon:>3} {:>10} {:>10} {:>14.6e}", all.nodes_explored, bnb.nodes_explored, bnb.cost);
        exhaustive_leaves += all.nodes_explored;
        bnb_leaves += bnb.nodes_explored;
    }
    println!("total leaves: {exhaustive_leaves} exhaustive, {bnb_leaves} branch-and-bound");
    Ok((exhaustive_leaves, bnb_leaves))
}

#[allow(dead_code)]
fn main() -> fcs_mpc::Result<()> {
    run_example().map(|_| ())
}
