//! Randomised properties of the dense linear-algebra kernels and of the
//! discretisation built on them.

use fcs_mpc::model::{zoh_discretize, ContinuousSystem};
use fcs_mpc::numerics::{
    inf_norm, mat_exp, solve_discrete_lyapunov, solve_linear, spectral_radius, symmetric_eigenvalues, Matrix, MAT_EXP_TOL,
};
use fcs_mpc::terminal_cost::{compute_terminal_p, verify_terminal_p};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, range: std::ops::Range<f64>) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(range, rows * cols).prop_map(move |v| Matrix::from_row_slice(rows, cols, &v))
}

fn square(max_n: usize, range: std::ops::Range<f64>) -> impl Strategy<Value = Matrix> {
    (1..=max_n).prop_flat_map(move |n| matrix(n, n, range.clone()))
}

/// Rescales a square matrix so that its spectral radius is `rho`.
fn with_radius(a: Matrix, rho: f64) -> Matrix {
    let current = spectral_radius(&a).unwrap();
    if current == 0.0 {
        a
    } else {
        a * (rho / current)
    }
}

fn stable(max_n: usize) -> impl Strategy<Value = Matrix> {
    (square(max_n, -1.0..1.0), 0.05..0.97f64).prop_map(|(a, rho)| with_radius(a, rho))
}

fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponential_of_negation_is_inverse(m in square(6, -1.0..1.0), norm in 0.0..10.0f64) {
        let n = m.nrows();
        let m = &m * (norm / inf_norm(&m).max(f64::MIN_POSITIVE));
        let product = mat_exp(&m, MAT_EXP_TOL).unwrap() * mat_exp(&-&m, MAT_EXP_TOL).unwrap();
        prop_assert!((product - Matrix::identity(n, n)).amax() <= 1e-8);
    }

    #[test]
    fn exponential_of_diagonal_is_elementwise(d in prop::collection::vec(-20.0..5.0f64, 1..7)) {
        let m = Matrix::from_diagonal(&nalgebra::DVector::from_vec(d.clone()));
        let e = mat_exp(&m, MAT_EXP_TOL).unwrap();
        for (i, v) in d.iter().enumerate() {
            prop_assert!((e[(i, i)] - v.exp()).abs() <= 1e-13 * v.exp().max(1.0));
        }
        prop_assert_eq!(e.clone() - Matrix::from_diagonal(&e.diagonal()), Matrix::zeros(d.len(), d.len()));
    }

    #[test]
    fn linear_solve_has_small_residual(m in square(6, -1.0..1.0), shift in 1.5..4.0f64, b in matrix(6, 2, -10.0..10.0)) {
        let n = m.nrows();
        let a = m + Matrix::identity(n, n) * shift;
        let rhs = b.rows(0, n).into_owned();
        let x = solve_linear("A", &a, &rhs).unwrap();
        prop_assert!(inf_norm(&(&a * &x - &rhs)) <= 1e-10 * (1.0 + inf_norm(&rhs)));
    }

    #[test]
    fn lyapunov_solution_satisfies_its_equation(a in stable(6), g in square(6, -1.0..1.0)) {
        let n = a.nrows();
        let g = g.resize(n, n, 0.0);
        let s = &g * g.transpose() + Matrix::identity(n, n) * 0.1;
        let p = solve_discrete_lyapunov(&a, &s).unwrap();
        let residual = &p - a.transpose() * &p * &a - &s;
        prop_assert!(inf_norm(&residual) <= 1e-8 * inf_norm(&s));
        prop_assert_eq!(p.clone(), p.transpose());
        prop_assert!(symmetric_eigenvalues(&p).unwrap()[0] > 0.0);
    }

    #[test]
    fn computed_terminal_weight_meets_its_margin(a in stable(6), eps in 1e-6..1e-2f64) {
        let n = a.nrows();
        let q = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 + i as f64 } else { 0.0 });
        let terminal = compute_terminal_p(&a, &q, Some(eps)).unwrap();
        let check = verify_terminal_p(&a, &q, &terminal.p).unwrap();
        prop_assert!(check.valid);
        prop_assert!(check.margin >= 0.999 * eps, "margin {} for epsilon {}", check.margin, eps);
    }

    #[test]
    fn two_half_steps_equal_one_full_step(
        a in square(4, -2.0..2.0),
        b in matrix(4, 2, -1.0..1.0),
        f_s in 5.0..50.0f64,
    ) {
        let n = a.nrows();
        let b = b.rows(0, n).into_owned();
        let sys = ContinuousSystem::new(a, b, Matrix::identity(n, n)).unwrap();
        let full = zoh_discretize(&sys, f_s).unwrap();
        let half = zoh_discretize(&sys, 2.0 * f_s).unwrap();
        prop_assert!(rel_err(&(&half.a * &half.a), &full.a) <= 1e-11);
        prop_assert!(rel_err(&(&half.a * &half.b + &half.b), &full.b) <= 1e-11);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_radius_scales_with_the_matrix(m in square(6, -2.0..2.0), c in -5.0..5.0f64) {
        let rho = spectral_radius(&m).unwrap();
        let scaled = spectral_radius(&(&m * c)).unwrap();
        prop_assert!((scaled - c.abs() * rho).abs() <= 1e-8 * (c.abs() * rho).max(f64::MIN_POSITIVE));
    }
}
