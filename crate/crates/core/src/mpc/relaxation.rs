//! Lower bounds on the cost-to-go from the continuous relaxation.
//!
//! Letting the inputs range over `ℝ^m` instead of `{0,1}^m` turns the
//! remaining horizon into an unconstrained linear-quadratic problem whose
//! optimal cost `V_i(z)` follows from a backward Riccati recursion. Because
//! the relaxation only enlarges the feasible set, `V_i` never exceeds the
//! finite-control-set cost-to-go, and branch-and-bound may add it to the
//! accumulated stage cost of a prefix.
//!
//! The recursion runs in deviation coordinates around a nominal trajectory
//! (the reference cycle, or a least-squares steady state for output
//! tracking) so that `V_i` has no large constant part that would cancel
//! against its quadratic part near the optimum.

use nalgebra::SymmetricEigen;

use crate::numerics::{Matrix, Vector};

/// Relative amount by which an evaluated bound is lowered before use, to
/// absorb rounding in the recursion and in the evaluation.
const SLACK: f64 = 1e-6;

/// `zᵀSz + 2sᵀz + c`, with `|S|` and `|s|` kept for the rounding slack.
#[derive(Debug, Clone)]
pub(super) struct ValueFunction {
    dim: usize,
    quad: Vec<f64>,
    quad_abs: Vec<f64>,
    lin: Vec<f64>,
    constant: f64,
}

impl ValueFunction {
    fn new(s: &Matrix, lin: &Vector, constant: f64) -> Self {
        let d = s.nrows();
        let quad: Vec<f64> = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| s[(i, j)]).collect();
        Self {
            dim: d,
            quad_abs: quad.iter().map(|v| v.abs()).collect(),
            quad,
            lin: lin.iter().copied().collect(),
            constant,
        }
    }

    /// A value not exceeding `V(z)`, and never negative.
    pub(super) fn lower_bound(&self, z: &[f64]) -> f64 {
        let d = self.dim;
        let mut value = self.constant;
        let mut magnitude = self.constant.abs();
        for i in 0..d {
            let row = &self.quad[i * d..(i + 1) * d];
            let row_abs = &self.quad_abs[i * d..(i + 1) * d];
            let mut sz = 0.0;
            let mut sz_abs = 0.0;
            for j in 0..d {
                sz += row[j] * z[j];
                sz_abs += row_abs[j] * z[j].abs();
            }
            value += z[i] * (sz + 2.0 * self.lin[i]);
            magnitude += z[i].abs() * (sz_abs + 2.0 * self.lin[i].abs());
        }
        (value - SLACK * magnitude).max(0.0)
    }
}

/// Quadratic `wᵀHw + 2tᵀw + c` in `w = [z; δ]`.
pub(super) struct StageQuadratic {
    pub h: Matrix,
    pub t: Vector,
    pub c: f64,
}

/// Adds the residual block `(G w + h)ᵀ W (G w + h)` to `stage`.
pub(super) fn add_block(stage: &mut StageQuadratic, g: &Matrix, offset: &Vector, w: &Matrix) {
    let gw = g.transpose() * w;
    stage.h += &gw * g;
    stage.t += &gw * offset;
    stage.c += offset.dot(&(w * offset));
}

/// Moore–Penrose inverse of a symmetric positive semidefinite matrix.
fn psd_pseudo_inverse(m: &Matrix) -> Matrix {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.amax();
    let mut inv = Matrix::zeros(m.nrows(), m.ncols());
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > 1e-12 * scale {
            let v = eig.eigenvectors.column(k);
            inv += (v * v.transpose()) / lambda;
        }
    }
    inv
}

/// Backward recursion `V_i(z) = min_δ ℓ_i(z, δ) + V_{i+1}(F [z; δ] + f_i)`
/// for `i = N−1, …, 0`, starting from `V_N = terminal`. Returns `V_0..V_N`.
pub(super) fn value_functions(
    f: &Matrix,
    offsets: &[Vector],
    stages: &[StageQuadratic],
    terminal: (Matrix, Vector, f64),
) -> Vec<ValueFunction> {
    let d = f.nrows();
    let m = f.ncols() - d;
    let (mut s, mut lin, mut c) = terminal;
    let mut out = vec![ValueFunction::new(&s, &lin, c)];
    for (stage, offset) in stages.iter().zip(offsets).rev() {
        let fs = f.transpose() * &s;
        let h = &stage.h + &fs * f;
        let t = &stage.t + &fs * offset + f.transpose() * &lin;
        let c_total = stage.c + c + offset.dot(&(&s * offset)) + 2.0 * lin.dot(offset);
        let h_zz = h.view((0, 0), (d, d));
        let h_zu = h.view((0, d), (d, m));
        let h_uu = h.view((d, d), (m, m)).into_owned();
        let t_z = t.rows(0, d);
        let t_u = t.rows(d, m);
        let h_uu_inv = psd_pseudo_inverse(&h_uu);
        let gain = h_zu * &h_uu_inv;
        let s_next = h_zz - &gain * h_zu.transpose();
        s = (&s_next + s_next.transpose()) * 0.5;
        lin = t_z - &gain * t_u;
        c = c_total - t_u.dot(&(&h_uu_inv * t_u));
        out.push(ValueFunction::new(&s, &lin, c));
    }
    out.reverse();
    out
}
