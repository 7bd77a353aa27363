use smallvec::SmallVec;

use crate::error::Result;
use crate::model::InputVector;
use crate::numerics::{Matrix, Vector};

use super::relaxation::{add_block, value_functions, StageQuadratic, ValueFunction};
use super::{reference_at, MpcProblem, TrackingReference};

type Scratch = SmallVec<[f64; 8]>;

fn row_major(m: &Matrix) -> Vec<f64> {
    (0..m.nrows()).flat_map(|i| m.row(i).iter().copied().collect::<Vec<_>>()).collect()
}

/// `eᵀWe` for a dense row-major `W`, clamped at zero so that partial sums
/// of stage costs never decrease.
fn quad(w: &[f64], e: &[f64]) -> f64 {
    let d = e.len();
    let mut total = 0.0;
    for i in 0..d {
        let row = &w[i * d..(i + 1) * d];
        let we: f64 = row.iter().zip(e).map(|(a, b)| a * b).sum();
        total += e[i] * we;
    }
    total.max(0.0)
}

#[derive(Debug, Clone)]
struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    fn contains(&self, v: &[f64]) -> bool {
        v.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }
}

#[derive(Debug, Clone)]
enum Tracking {
    Output {
        y_ref: Vec<f64>,
        prev_code: usize,
    },
    Cycle {
        /// `x̄_{i|k}` for `i = 0..=N`
        states: Vec<Vec<f64>>,
        /// code of `ū_{i|k}` for `i = 0..N`
        inputs: Vec<usize>,
    },
}

/// One MPC instance (plant, weights, references at time `k`, initial state)
/// flattened into plain slices for the solvers' inner loops.
#[derive(Debug, Clone)]
pub struct Horizon {
    n: usize,
    q_dim: usize,
    horizon: usize,
    alphabet: usize,
    a: Vec<f64>,
    c: Vec<f64>,
    responses: Vec<Vec<f64>>,
    weight_q: Vec<f64>,
    weight_p: Vec<f64>,
    /// `(u_d − u_e)ᵀR(u_d − u_e)` at `[d * alphabet + e]`
    input_penalty: Vec<f64>,
    tracking: Tracking,
    state_bounds: Option<Bounds>,
    output_bounds: Option<Bounds>,
    x0: Vec<f64>,
    /// Input vectors as reals, indexed by code.
    input_values: Vec<Vec<f64>>,
    /// Steady state `(x_s, u_s)` the output-tracking relaxation is
    /// expanded around; the cycle relaxation uses the cycle itself.
    steady: Option<SteadyPoint>,
    /// Relaxed cost-to-go `V_i` for `i = 0..=N`.
    relaxed: Vec<ValueFunction>,
}

impl Horizon {
    pub fn new(prob: &MpcProblem, x: &Vector, k: usize, u_prev: &InputVector) -> Result<Self> {
        prob.sys.check_state(x)?;
        prob.sys.check_input(u_prev)?;
        let sys = &prob.sys;
        let m = sys.input_bits();
        let alphabet = sys.alphabet_size();
        let inputs: Vec<Vector> = (0..alphabet).map(|d| InputVector::from_code(d, m).to_vector()).collect();
        let r = row_major(&prob.weights.r);
        let mut input_penalty = vec![0.0; alphabet * alphabet];
        for d in 0..alphabet {
            for e in 0..alphabet {
                let diff: Vec<f64> = (&inputs[d] - &inputs[e]).iter().copied().collect();
                input_penalty[d * alphabet + e] = quad(&r, &diff);
            }
        }
        let tracking = match &prob.reference {
            TrackingReference::ConstantOutput(y) => Tracking::Output {
                y_ref: y.iter().copied().collect(),
                prev_code: u_prev.code(),
            },
            TrackingReference::Cycle(cycle) => {
                let states = (0..=prob.horizon)
                    .map(|i| reference_at(cycle, k, i, prob.horizon).0.iter().copied().collect())
                    .collect();
                let inputs = (0..prob.horizon)
                    .map(|i| reference_at(cycle, k, i, prob.horizon).1.expect("i < horizon").code())
                    .collect();
                Tracking::Cycle { states, inputs }
            }
        };
        let to_bounds = |b: &super::BoxBounds| Bounds {
            lower: b.lower.iter().copied().collect(),
            upper: b.upper.iter().copied().collect(),
        };
        let (steady, relaxed) = relaxation(prob, &inputs, &tracking);
        Ok(Self {
            n: sys.state_dim(),
            q_dim: sys.output_dim(),
            horizon: prob.horizon,
            alphabet,
            a: row_major(&sys.a),
            c: row_major(&sys.c),
            responses: sys.input_responses().iter().map(|v| v.iter().copied().collect()).collect(),
            weight_q: row_major(&prob.weights.q),
            weight_p: row_major(&prob.weights.p),
            input_penalty,
            tracking,
            state_bounds: prob.state_bounds.as_ref().map(to_bounds),
            output_bounds: prob.output_bounds.as_ref().map(to_bounds),
            x0: x.iter().copied().collect(),
            input_values: inputs.iter().map(|v| v.iter().copied().collect()).collect(),
            steady,
            relaxed,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.x0
    }

    /// Input code that `Δu_0` is measured against (ignored for cycles).
    pub fn initial_prev(&self) -> usize {
        match self.tracking {
            Tracking::Output { prev_code, .. } => prev_code,
            Tracking::Cycle { .. } => 0,
        }
    }

    fn output_of(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.c[j * self.n..(j + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn output_error(&self, x: &[f64], y_ref: &[f64]) -> Scratch {
        let mut y: Scratch = SmallVec::from_elem(0.0, self.q_dim);
        self.output_of(x, &mut y);
        for (a, b) in y.iter_mut().zip(y_ref) {
            *a -= b;
        }
        y
    }

    /// Stage cost of applying input `code` at predicted step `i` from state
    /// `x`; `prev` is the input applied one step earlier.
    pub fn stage(&self, i: usize, x: &[f64], code: usize, prev: usize) -> f64 {
        match &self.tracking {
            Tracking::Output { y_ref, .. } => {
                let e = self.output_error(x, y_ref);
                quad(&self.weight_q, &e) + self.input_penalty[code * self.alphabet + prev]
            }
            Tracking::Cycle { states, inputs } => {
                let e: Scratch = x.iter().zip(&states[i]).map(|(a, b)| a - b).collect();
                quad(&self.weight_q, &e) + self.input_penalty[code * self.alphabet + inputs[i]]
            }
        }
    }

    pub fn terminal(&self, x: &[f64]) -> f64 {
        match &self.tracking {
            Tracking::Output { y_ref, .. } => quad(&self.weight_p, &self.output_error(x, y_ref)),
            Tracking::Cycle { states, .. } => {
                let e: Scratch = x.iter().zip(&states[self.horizon]).map(|(a, b)| a - b).collect();
                quad(&self.weight_p, &e)
            }
        }
    }

    /// Lower bound on the cost of predicted steps `depth..N` from state `x`,
    /// given that `last` was applied at step `depth − 1`.
    pub fn cost_to_go_bound(&self, depth: usize, x: &[f64], last: usize) -> f64 {
        let z: Scratch = match (&self.tracking, &self.steady) {
            (Tracking::Cycle { states, .. }, _) => x.iter().zip(&states[depth]).map(|(a, b)| a - b).collect(),
            (Tracking::Output { .. }, Some((x_s, u_s))) => x
                .iter()
                .zip(x_s)
                .map(|(a, b)| a - b)
                .chain(self.input_values[last].iter().zip(u_s).map(|(a, b)| a - b))
                .collect(),
            (Tracking::Output { .. }, None) => unreachable!("output tracking always has a steady state"),
        };
        self.relaxed[depth].lower_bound(&z)
    }

    /// `out = A x + B u_code`.
    pub fn advance(&self, x: &[f64], code: usize, out: &mut [f64]) {
        let bu = &self.responses[code];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.a[i * self.n..(i + 1) * self.n];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bu[i];
        }
    }

    pub fn feasible(&self, x: &[f64]) -> bool {
        if let Some(b) = &self.state_bounds {
            if !b.contains(x) {
                return false;
            }
        }
        if let Some(b) = &self.output_bounds {
            let mut y: Scratch = SmallVec::from_elem(0.0, self.q_dim);
            self.output_of(x, &mut y);
            if !b.contains(&y) {
                return false;
            }
        }
        true
    }

    /// Cost of a full code sequence and whether every predicted state
    /// `x_1..x_N` satisfies the bounds.
    pub fn sequence_cost(&self, codes: &[usize]) -> (f64, bool) {
        let mut x = self.x0.clone();
        let mut next = vec![0.0; self.n];
        let mut cost = 0.0;
        let mut feasible = true;
        let mut prev = self.initial_prev();
        for (i, &code) in codes.iter().enumerate() {
            cost += self.stage(i, &x, code, prev);
            self.advance(&x, code, &mut next);
            std::mem::swap(&mut x, &mut next);
            feasible &= self.feasible(&x);
            prev = code;
        }
        cost += self.terminal(&x);
        (cost, feasible)
    }
}

/// Least-squares `(x_s, u_s)` with `x_s = A x_s + B u_s` and `C x_s = y_ref`.
/// Any mismatch is carried as an offset by the relaxation, so an inexact
/// solution only costs accuracy of the expansion point, not validity.
fn steady_state(prob: &MpcProblem, y_ref: &[f64]) -> (Vector, Vector) {
    let sys = &prob.sys;
    let (n, m, q) = (sys.state_dim(), sys.input_bits(), sys.output_dim());
    let mut lhs = Matrix::zeros(n + q, n + m);
    lhs.view_mut((0, 0), (n, n)).copy_from(&(Matrix::identity(n, n) - &sys.a));
    lhs.view_mut((0, n), (n, m)).copy_from(&(-&sys.b));
    lhs.view_mut((n, 0), (q, n)).copy_from(&sys.c);
    let mut rhs = Vector::zeros(n + q);
    rhs.rows_mut(n, q).copy_from_slice(y_ref);
    match lhs.svd(true, true).solve(&rhs, 1e-12) {
        Ok(sol) if sol.iter().all(|v| v.is_finite()) => (sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()),
        _ => (Vector::zeros(n), Vector::zeros(m)),
    }
}

/// State and input of a steady operating point.
type SteadyPoint = (Vec<f64>, Vec<f64>);

fn relaxation(
    prob: &MpcProblem,
    inputs: &[Vector],
    tracking: &Tracking,
) -> (Option<SteadyPoint>, Vec<ValueFunction>) {
    let sys = &prob.sys;
    let w = &prob.weights;
    let (n, m) = (sys.state_dim(), sys.input_bits());
    let horizon = prob.horizon;
    match tracking {
        Tracking::Cycle { states, inputs: codes } => {
            // e = x − x̄: e⁺ = A e + B (u − ū) + r with r the cycle's
            // (tiny) periodicity residual
            let mut f = Matrix::zeros(n, n + m);
            f.view_mut((0, 0), (n, n)).copy_from(&sys.a);
            f.view_mut((0, n), (n, m)).copy_from(&sys.b);
            let offsets: Vec<Vector> = (0..horizon)
                .map(|i| {
                    let x = Vector::from_column_slice(&states[i]);
                    &sys.a * x + &sys.b * &inputs[codes[i]] - Vector::from_column_slice(&states[i + 1])
                })
                .collect();
            let mut h = Matrix::zeros(n + m, n + m);
            h.view_mut((0, 0), (n, n)).copy_from(&w.q);
            h.view_mut((n, n), (m, m)).copy_from(&w.r);
            let stages: Vec<StageQuadratic> = (0..horizon)
                .map(|_| StageQuadratic {
                    h: h.clone(),
                    t: Vector::zeros(n + m),
                    c: 0.0,
                })
                .collect();
            let terminal = (w.p.clone(), Vector::zeros(n), 0.0);
            (None, value_functions(&f, &offsets, &stages, terminal))
        }
        Tracking::Output { y_ref, .. } => {
            // z = (x − x_s, u_prev − u_s), δ = u − u_s
            let (x_s, u_s) = steady_state(prob, y_ref);
            let d = n + m;
            let mut f = Matrix::zeros(d, d + m);
            f.view_mut((0, 0), (n, n)).copy_from(&sys.a);
            f.view_mut((0, d), (n, m)).copy_from(&sys.b);
            f.view_mut((n, d), (m, m)).copy_from(&Matrix::identity(m, m));
            let r = &sys.a * &x_s + &sys.b * &u_s - &x_s;
            let mut offset = Vector::zeros(d);
            offset.rows_mut(0, n).copy_from(&r);
            let offsets = vec![offset; horizon];
            let o = &sys.c * &x_s - Vector::from_column_slice(y_ref);
            let q_out = sys.output_dim();
            let mut g_out = Matrix::zeros(q_out, d + m);
            g_out.view_mut((0, 0), (q_out, n)).copy_from(&sys.c);
            let mut g_du = Matrix::zeros(m, d + m);
            g_du.view_mut((0, n), (m, m)).copy_from(&(-Matrix::identity(m, m)));
            g_du.view_mut((0, d), (m, m)).copy_from(&Matrix::identity(m, m));
            let mut stage = StageQuadratic {
                h: Matrix::zeros(d + m, d + m),
                t: Vector::zeros(d + m),
                c: 0.0,
            };
            add_block(&mut stage, &g_out, &o, &w.q);
            add_block(&mut stage, &g_du, &Vector::zeros(m), &w.r);
            let stages: Vec<StageQuadratic> = (0..horizon)
                .map(|_| StageQuadratic {
                    h: stage.h.clone(),
                    t: stage.t.clone(),
                    c: stage.c,
                })
                .collect();
            let mut s_term = Matrix::zeros(d, d);
            s_term.view_mut((0, 0), (n, n)).copy_from(&(sys.c.transpose() * &w.p * &sys.c));
            let mut lin_term = Vector::zeros(d);
            lin_term.rows_mut(0, n).copy_from(&(sys.c.transpose() * &w.p * &o));
            let c_term = o.dot(&(&w.p * &o));
            let relaxed = value_functions(&f, &offsets, &stages, (s_term, lin_term, c_term));
            (Some((x_s.iter().copied().collect(), u_s.iter().copied().collect())), relaxed)
        }
    }
}
