//! Terminal weight `P ≻ 0` with `−P + Q + AᵀPA ≺ 0`, the condition under
//! which the limit-cycle tracking cost decreases along the closed loop.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{asymmetry, ensure_square, solve_discrete_lyapunov, spectral_radius, symmetric_eigenvalues, Matrix};

/// Largest tolerated entry of `P − Pᵀ`.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TerminalCost {
    pub p: Matrix,
    /// Smallest eigenvalue of `P − Q − AᵀPA`.
    pub margin: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TerminalCheck {
    pub valid: bool,
    /// `−λ_max(−P + Q + AᵀPA)`; positive when the decrease condition holds.
    pub margin: f64,
    pub min_eig_p: f64,
}

/// `trace(Q)/n · 1e−6`, or `1e−6` when `Q` has zero trace.
pub fn default_epsilon(q: &Matrix) -> f64 {
    let n = q.nrows().max(1) as f64;
    let scaled = 1e-6 * q.trace() / n;
    if scaled > 0.0 {
        scaled
    } else {
        1e-6
    }
}

fn check_stable(a: &Matrix) -> Result<()> {
    let rho = spectral_radius(a)?;
    if rho >= 1.0 {
        return Err(Error::Unstable { spectral_radius: rho });
    }
    Ok(())
}

fn check_same_size(name: &str, a: &Matrix, m: &Matrix) -> Result<()> {
    ensure_square(name, m)?;
    if m.nrows() != a.nrows() {
        return Err(Error::dimension(name, a.nrows(), m.nrows()));
    }
    Ok(())
}

/// `P` solving `P = AᵀPA + Q + εI`, so that `−P + Q + AᵀPA = −εI` up to
/// rounding.
pub fn compute_terminal_p(a: &Matrix, q: &Matrix, epsilon: Option<f64>) -> Result<TerminalCost> {
    ensure_square("A", a)?;
    check_same_size("Q", a, q)?;
    let epsilon = epsilon.unwrap_or_else(|| default_epsilon(q));
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::validation("epsilon", format!("must be positive, got {epsilon}")));
    }
    check_stable(a)?;
    let n = a.nrows();
    let p = solve_discrete_lyapunov(a, &(q + Matrix::identity(n, n) * epsilon))?;
    let check = verify_terminal_p(a, q, &p)?;
    Ok(TerminalCost {
        p,
        margin: check.margin,
        epsilon,
    })
}

/// Checks `P ≻ 0` and `−P + Q + AᵀPA ≺ 0` via symmetric eigenvalues.
pub fn verify_terminal_p(a: &Matrix, q: &Matrix, p: &Matrix) -> Result<TerminalCheck> {
    ensure_square("A", a)?;
    check_same_size("Q", a, q)?;
    check_same_size("P", a, p)?;
    if asymmetry(p) > SYMMETRY_TOL * p.amax().max(1.0) {
        return Err(Error::validation("P", "must be symmetric"));
    }
    check_stable(a)?;
    let decrease = -p + q + a.transpose() * p * a;
    let max_eig_m = *symmetric_eigenvalues(&decrease)?.last().unwrap_or(&0.0);
    let min_eig_p = *symmetric_eigenvalues(p)?.first().unwrap_or(&0.0);
    Ok(TerminalCheck {
        valid: max_eig_m < 0.0 && min_eig_p > 0.0,
        margin: -max_eig_m,
        min_eig_p,
    })
}
