//! Small dense-matrix kernels: matrix exponential, checked linear solves,
//! spectral radius, symmetric spectra and the discrete Lyapunov equation.
//!
//! Everything here works on `nalgebra` dynamic matrices in `f64`. The sizes
//! this crate deals with are tiny (n ≤ 7 for the exponential, n² ≤ 49 for the
//! Kronecker-form Lyapunov solve), so dense direct methods are used throughout.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Condition-number estimate above which a solve is reported as singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e12;

/// Default relative tolerance for [`mat_exp`].
pub const MAT_EXP_TOL: f64 = 1e-12;

/// Builds a matrix from row-major nested rows, rejecting ragged or
/// non-finite input.
pub fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::dimension(
                format!("{name} row {i}"),
                ncols,
                row.len(),
            ));
        }
    }
    let m = Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    ensure_finite(name, &m)?;
    Ok(m)
}

/// Row-major nested representation, the inverse of [`matrix_from_rows`].
pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub fn ensure_finite(name: &str, m: &Matrix) -> Result<()> {
    if let Some(v) = m.iter().find(|v| !v.is_finite()) {
        return Err(Error::validation(name, format!("non-finite entry {v}")));
    }
    Ok(())
}

pub fn ensure_square(name: &str, m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::dimension(
            format!("{name} (square required)"),
            format!("{}x{}", m.nrows(), m.nrows()),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

pub fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn one_norm(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

// Coefficients of the degree-13 diagonal Padé approximant to exp.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which the degree-13 approximant is accurate to unit
// roundoff in double precision.
const THETA_13: f64 = 5.371920351148152;

/// Leading coefficient (13!)² / (26! · 27!) of the degree-13 Padé remainder.
fn pade13_remainder_coefficient() -> f64 {
    let fact = |n: u32| (1..=n).fold(1.0_f64, |acc, k| acc * k as f64);
    fact(13) * fact(13) / (fact(26) * fact(27))
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
///
/// The scaling exponent is the smallest `s` for which `‖M‖₁ / 2ˢ` lies inside
/// the double-precision region of the approximant and the leading remainder
/// term is below `tol`.
pub fn mat_exp(m: &Matrix, tol: f64) -> Result<Matrix> {
    ensure_square("mat_exp input", m)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::validation("tol", "must be positive"));
    }
    ensure_finite("mat_exp input", m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }

    let norm = one_norm(m);
    let c13 = pade13_remainder_coefficient();
    let mut s: i32 = 0;
    let mut r = norm;
    while r > THETA_13 || c13 * r.powi(27) > tol {
        s += 1;
        r = norm / 2f64.powi(s);
        if s > 1100 {
            break;
        }
    }

    let a = m / 2f64.powi(s);
    let ident = Matrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &ident * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];

    let denom = &v - &u;
    let numer = &v + &u;
    let mut result = solve_linear("Padé denominator", &denom, &numer)?;
    for _ in 0..s {
        result = &result * &result;
    }
    Ok(result)
}

/// Solves `M·X = RHS`, reporting `label` in the error when `M` is singular or
/// its 1-norm condition estimate exceeds [`SINGULARITY_THRESHOLD`].
pub fn solve_linear(label: &str, m: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    let lu = CheckedLu::new(label, m)?;
    lu.solve(rhs)
}

/// LU factorisation that has already passed the conditioning check, so a
/// single factorisation can serve many right-hand sides.
pub struct CheckedLu {
    matrix: Matrix,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl CheckedLu {
    pub fn new(label: &str, m: &Matrix) -> Result<Self> {
        ensure_square(label, m)?;
        ensure_finite(label, m)?;
        let lu = m.clone().lu();
        let singular = || Error::Singular {
            matrix: label.to_string(),
            condition: f64::INFINITY,
        };
        let inverse = lu.try_inverse().ok_or_else(singular)?;
        let condition = one_norm(m) * one_norm(&inverse);
        if !condition.is_finite() || condition > SINGULARITY_THRESHOLD {
            return Err(Error::Singular {
                matrix: label.to_string(),
                condition,
            });
        }
        Ok(Self {
            matrix: m.clone(),
            lu,
        })
    }

    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        if rhs.nrows() != self.matrix.nrows() {
            return Err(Error::dimension(
                "solve_linear right-hand side rows",
                self.matrix.nrows(),
                rhs.nrows(),
            ));
        }
        let mut x = self.lu.solve(rhs).ok_or_else(|| Error::Singular {
            matrix: "lu".into(),
            condition: f64::INFINITY,
        })?;
        // one step of iterative refinement
        let residual = rhs - &self.matrix * &x;
        if let Some(dx) = self.lu.solve(&residual) {
            x += dx;
        }
        Ok(x)
    }

    pub fn solve_vector(&self, rhs: &Vector) -> Result<Vector> {
        let x = self.solve(&Matrix::from_column_slice(rhs.len(), 1, rhs.as_slice()))?;
        Ok(x.column(0).into_owned())
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    ensure_square("spectral_radius input", m)?;
    ensure_finite("spectral_radius input", m)?;
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Eigenvalues of the symmetric part `(M + Mᵀ)/2`, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    ensure_square("symmetric_eigenvalues input", m)?;
    let sym = (m + m.transpose()) * 0.5;
    let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Largest absolute entry of `M − Mᵀ`.
pub fn asymmetry(m: &Matrix) -> f64 {
    (m - m.transpose()).amax()
}

/// Solves `P = AᵀPA + S` for a Schur-stable `A` through the Kronecker form
/// `(I − Aᵀ⊗Aᵀ)·vec(P) = vec(S)`. The result is symmetrised.
pub fn solve_discrete_lyapunov(a: &Matrix, s: &Matrix) -> Result<Matrix> {
    ensure_square("A", a)?;
    ensure_square("S", s)?;
    let n = a.nrows();
    if s.nrows() != n {
        return Err(Error::dimension("Lyapunov right-hand side", n, s.nrows()));
    }
    let rho = spectral_radius(a)?;
    if rho >= 1.0 {
        return Err(Error::Unstable {
            spectral_radius: rho,
        });
    }
    let scale = s.amax().max(f64::MIN_POSITIVE);
    if asymmetry(s) > 1e-10 * scale {
        return Err(Error::validation("S", "must be symmetric"));
    }
    if symmetric_eigenvalues(s)?.first().copied().unwrap_or(0.0) < -1e-12 * scale {
        return Err(Error::validation("S", "must be positive semidefinite"));
    }

    let at = a.transpose();
    let kron = Matrix::identity(n * n, n * n) - at.kronecker(&at);
    // nalgebra storage is column-major, so the raw slice is vec(·).
    let vec_s = Matrix::from_column_slice(n * n, 1, s.as_slice());
    let vec_p = solve_linear("I - A^T (x) A^T", &kron, &vec_s)?;
    let p = Matrix::from_column_slice(n, n, vec_p.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(rows: &[&[f64]]) -> Matrix {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        matrix_from_rows("test", &rows).unwrap()
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = mat_exp(&Matrix::zeros(3, 3), MAT_EXP_TOL).unwrap();
        assert_eq!(e, Matrix::identity(3, 3));
    }

    #[test]
    fn exp_of_diagonal() {
        let e = mat_exp(&m(&[&[1.0, 0.0], &[0.0, -1.0]]), MAT_EXP_TOL).unwrap();
        assert_relative_eq!(e[(0, 0)], std::f64::consts::E, max_relative = 1e-14);
        assert_relative_eq!(e[(1, 1)], 1.0 / std::f64::consts::E, max_relative = 1e-14);
        assert_eq!(e[(0, 1)], 0.0);
        assert_eq!(e[(1, 0)], 0.0);
    }

    #[test]
    fn exp_of_nilpotent_truncates() {
        let e = mat_exp(&m(&[&[0.0, 1.0], &[0.0, 0.0]]), MAT_EXP_TOL).unwrap();
        assert_relative_eq!(e, m(&[&[1.0, 1.0], &[0.0, 1.0]]), epsilon = 1e-15);
    }

    #[test]
    fn exp_of_large_norm_rotation() {
        // exp([[0, t], [-t, 0]]) is a rotation by t.
        let t = 40.0_f64;
        let e = mat_exp(&m(&[&[0.0, t], &[-t, 0.0]]), MAT_EXP_TOL).unwrap();
        assert_relative_eq!(e[(0, 0)], t.cos(), epsilon = 1e-12);
        assert_relative_eq!(e[(0, 1)], t.sin(), epsilon = 1e-12);
    }

    #[test]
    fn exp_rejects_bad_input() {
        assert!(matches!(
            mat_exp(&Matrix::zeros(2, 3), MAT_EXP_TOL),
            Err(Error::Dimension { .. })
        ));
        assert!(mat_exp(&Matrix::zeros(2, 2), 0.0).is_err());
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let b = m(&[&[3.0], &[-2.0]]);
        assert_eq!(solve_linear("I", &Matrix::identity(2, 2), &b).unwrap(), b);
        let x = solve_linear("D", &m(&[&[2.0, 0.0], &[0.0, 4.0]]), &m(&[&[2.0], &[4.0]])).unwrap();
        assert_relative_eq!(x, m(&[&[1.0], &[1.0]]), epsilon = 1e-15);
    }

    #[test]
    fn singular_solve_names_matrix() {
        let err = solve_linear("I - A^p", &m(&[&[1.0, 2.0], &[2.0, 4.0]]), &m(&[&[1.0], &[1.0]]))
            .unwrap_err();
        match err {
            Error::Singular { matrix, .. } => assert_eq!(matrix, "I - A^p"),
            other => panic!("unexpected {other:?}"),
        }
        let near = m(&[&[1.0, 1.0], &[1.0, 1.0 + 1e-14]]);
        assert!(matches!(
            solve_linear("near", &near, &m(&[&[1.0], &[1.0]])),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn spectral_radius_examples() {
        assert_relative_eq!(spectral_radius(&Matrix::identity(2, 2)).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            spectral_radius(&m(&[&[0.5, 0.0], &[0.0, -0.9]])).unwrap(),
            0.9,
            epsilon = 1e-12
        );
        // complex pair 0.6 ± 0.8i
        assert_relative_eq!(
            spectral_radius(&m(&[&[0.6, -0.8], &[0.8, 0.6]])).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn lyapunov_trivial_cases() {
        let q = m(&[&[2.0, 0.5], &[0.5, 1.0]]);
        let p = solve_discrete_lyapunov(&Matrix::zeros(2, 2), &q).unwrap();
        assert_relative_eq!(p, q, epsilon = 1e-14);

        let p = solve_discrete_lyapunov(&m(&[&[0.5]]), &m(&[&[0.75]])).unwrap();
        assert_relative_eq!(p[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_rejects_unstable_and_indefinite() {
        assert!(matches!(
            solve_discrete_lyapunov(&m(&[&[1.0]]), &m(&[&[1.0]])),
            Err(Error::Unstable { .. })
        ));
        assert!(matches!(
            solve_discrete_lyapunov(&m(&[&[0.5]]), &m(&[&[-1.0]])),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn ragged_and_nonfinite_rows_rejected() {
        assert!(matrix_from_rows("X", &[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(matrix_from_rows("X", &[vec![f64::NAN]]).is_err());
        let rows = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(matrix_to_rows(&matrix_from_rows("X", &rows).unwrap()), rows);
    }
}
