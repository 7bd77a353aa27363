//! Synthesises a terminal weight `P` with `−P + Q + AᵀPA ≺ 0` for the
//! amplifier's limit-cycle controller, and checks the hand-tuned diagonal
//! weight that comes with the same stage weights.
//!
//! ```text
//! cargo run --example terminal_weight
//! ```

use fcs_mpc::model::{build_amplifier, zoh_discretize, AmplifierParams};
use fcs_mpc::numerics::{symmetric_eigenvalues, Matrix, Vector};
use fcs_mpc::terminal_cost::{compute_terminal_p, verify_terminal_p, TerminalCheck};

pub fn run_example() -> fcs_mpc::Result<(TerminalCheck, TerminalCheck)> {
    let params = AmplifierParams::industrial();
    let sys = zoh_discretize(&build_amplifier(&params)?, 400e3)?;
    let (ql, qc) = (params.l / params.l_m, params.c / params.l_m);
    let q = Matrix::from_diagonal(&Vector::from_vec(vec![ql, qc, ql, qc, 1.0]));

    let computed = compute_terminal_p(&sys.a, &q, None)?;
    let auto = verify_terminal_p(&sys.a, &q, &computed.p)?;
    let eig = symmetric_eigenvalues(&computed.p)?;
    println!("computed P (epsilon {:.3e}):", computed.epsilon);
    println!("  eigenvalues {:.4e} .. {:.4e}", eig[0], eig[eig.len() - 1]);
    println!("  valid {} with margin {:.4e}", auto.valid, auto.margin);

    let diagonal = Matrix::from_diagonal(&Vector::from_vec(vec![2e4, 189.0, 2e4, 189.0, 9.5e6]));
    let tuned = verify_terminal_p(&sys.a, &q, &diagonal)?;
    println!("diag(2e4, 189, 2e4, 189, 9.5e6):");
    println!("  valid {} with margin {:.4e}", tuned.valid, tuned.margin);
    Ok((auto, tuned))
}

#[allow(dead_code)]
fn main() -> fcs_mpc::Result<()> {
    run_example().map(|_| ())
}
