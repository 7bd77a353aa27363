//! Builds the two-power-stage amplifier, discretises it with a zero-order
//! hold at 400 kHz and prints the discrete matrices and their spectrum.
//!
//! ```text
//! cargo run --example discretize_amplifier
//! ```

use fcs_mpc::model::{build_amplifier, zoh_discretize, AmplifierParams};
use fcs_mpc::numerics::matrix_to_rows;

pub fn run_example() -> fcs_mpc::Result<f64> {
    let params = AmplifierParams::industrial();
    let continuous = build_amplifier(&params)?;
    let sys = zoh_discretize(&continuous, 400e3)?;
    println!("state order: i_Lp, v_Cp, i_Ln, v_Cn, i_o; inputs S_p, S_n");
    for (name, m) in [("A", &sys.a), ("B", &sys.b)] {
        println!("{name} =");
        for row in matrix_to_rows(m) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>14.6e}")).collect();
            println!("  [{}]", cells.join(", "));
        }
    }
    let mut moduli: Vec<f64> = sys.a.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    let rho = sys.spectral_radius()?;
    println!("eigenvalue moduli: {moduli:.8?}");
    println!("spectral radius:   {rho:.16}");
    Ok(rho)
}

#[allow(dead_code)]
fn main() -> fcs_mpc::Result<()> {
    run_example().map(|_| ())
}
