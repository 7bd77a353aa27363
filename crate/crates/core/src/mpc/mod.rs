//! Finite-control-set MPC for output tracking and for limit-cycle tracking.
//!
//! Two cost functions share one problem type:
//!
//! * **constant output** — `Σ (y_i − y_ref)ᵀQ(y_i − y_ref) + Δu_iᵀRΔu_i` plus
//!   the terminal `(y_N − y_ref)ᵀP(y_N − y_ref)`, with `Δu_0 = u_0 − u_prev`;
//! * **cycle** — `Σ (x_i − x̄_{i|k})ᵀQ(x_i − x̄_{i|k}) + (u_i − ū_{i|k})ᵀR(u_i − ū_{i|k})`
//!   plus `(x_N − x̄_{N|k})ᵀP(x_N − x̄_{N|k})`, where the references are read
//!   from the cycle at phase `(k + i) mod p`.
//!
//! Both are minimised over all `(2^m)^N` input sequences, either by plain
//! enumeration or by depth-first branch-and-bound. The two solvers visit
//! sequences in the same lexicographic order and use the same acceptance rule,
//! so they return identical sequences.

mod cost;
mod relaxation;
mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_cycle::LimitCycle;
use crate::model::{DiscreteSystem, InputVector};
use crate::numerics::{asymmetry, ensure_finite, symmetric_eigenvalues, Matrix, Vector};

pub use cost::Horizon;
pub use solver::{solve_branch_and_bound, solve_exhaustive};

/// Default cap on `(2^m)^N` for the exhaustive solver.
pub const DEFAULT_SEQUENCE_CAP: u64 = 1 << 24;

/// Stage, input and terminal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcWeights {
    pub q: Matrix,
    pub r: Matrix,
    pub p: Matrix,
}

impl MpcWeights {
    /// Checks symmetry, `Q ⪰ 0`, `R ⪰ 0` and `P ≻ 0`.
    pub fn new(q: Matrix, r: Matrix, p: Matrix) -> Result<Self> {
        check_weight("Q", &q, false)?;
        check_weight("R", &r, false)?;
        check_weight("P", &p, true)?;
        Ok(Self { q, r, p })
    }
}

fn check_weight(name: &str, w: &Matrix, definite: bool) -> Result<()> {
    crate::numerics::ensure_square(name, w)?;
    ensure_finite(name, w)?;
    let scale = w.amax().max(f64::MIN_POSITIVE);
    if asymmetry(w) > 1e-10 * scale {
        return Err(Error::validation(name, "must be symmetric"));
    }
    let min_eig = symmetric_eigenvalues(w)?.first().copied().unwrap_or(0.0);
    if definite && min_eig <= 0.0 {
        return Err(Error::validation(name, format!("must be positive definite (min eigenvalue {min_eig:e})")));
    }
    if !definite && min_eig < -1e-12 * scale {
        return Err(Error::validation(name, format!("must be positive semidefinite (min eigenvalue {min_eig:e})")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrackingReference {
    ConstantOutput(Vector),
    Cycle(LimitCycle),
}

impl TrackingReference {
    pub fn cycle(&self) -> Option<&LimitCycle> {
        match self {
            TrackingReference::Cycle(c) => Some(c),
            TrackingReference::ConstantOutput(_) => None,
        }
    }
}

/// Axis-aligned box `lower ≤ v ≤ upper`; use infinities for free entries.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lower: Vector,
    pub upper: Vector,
}

impl BoxBounds {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dimension("bounds", lower.len(), upper.len()));
        }
        for (i, (lo, hi)) in lower.iter().zip(upper.iter()).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::validation(
                    format!("bounds[{i}]"),
                    format!("lower {lo} must not exceed upper {hi}"),
                ));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        v.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SolverChoice {
    #[serde(rename = "exhaustive")]
    Exhaustive,
    #[default]
    #[serde(rename = "bnb")]
    BranchAndBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcProblem {
    pub sys: DiscreteSystem,
    pub horizon: usize,
    pub weights: MpcWeights,
    pub reference: TrackingReference,
    /// Box on predicted states `x_{i|k}`, `i = 1..N`.
    pub state_bounds: Option<BoxBounds>,
    /// Box on predicted outputs `C x_{i|k}`, `i = 1..N`.
    pub output_bounds: Option<BoxBounds>,
    /// Cap on `(2^m)^N` for [`solve_exhaustive`].
    pub max_sequences: u64,
}

impl MpcProblem {
    pub fn new(
        sys: DiscreteSystem,
        horizon: usize,
        weights: MpcWeights,
        reference: TrackingReference,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::validation("mpc.horizon", "must be at least 1"));
        }
        let n = sys.state_dim();
        let m = sys.input_bits();
        let q = sys.output_dim();
        let tracked = match &reference {
            TrackingReference::ConstantOutput(y) => {
                if y.len() != q {
                    return Err(Error::dimension("y_ref", q, y.len()));
                }
                q
            }
            TrackingReference::Cycle(c) => {
                if c.state_dim() != n || c.input_bits() != m {
                    return Err(Error::dimension(
                        "reference cycle (n, m)",
                        format!("({n}, {m})"),
                        format!("({}, {})", c.state_dim(), c.input_bits()),
                    ));
                }
                n
            }
        };
        for (name, w, dim) in [("Q", &weights.q, tracked), ("P", &weights.p, tracked), ("R", &weights.r, m)] {
            if w.nrows() != dim {
                return Err(Error::dimension(format!("weight {name}"), format!("{dim}x{dim}"), format!("{}x{}", w.nrows(), w.ncols())));
            }
        }
        Ok(Self {
            sys,
            horizon,
            weights,
            reference,
            state_bounds: None,
            output_bounds: None,
            max_sequences: DEFAULT_SEQUENCE_CAP,
        })
    }

    pub fn with_state_bounds(mut self, bounds: BoxBounds) -> Result<Self> {
        if bounds.len() != self.sys.state_dim() {
            return Err(Error::dimension("state_bounds", self.sys.state_dim(), bounds.len()));
        }
        self.state_bounds = Some(bounds);
        Ok(self)
    }

    pub fn with_output_bounds(mut self, bounds: BoxBounds) -> Result<Self> {
        if bounds.len() != self.sys.output_dim() {
            return Err(Error::dimension("output_bounds", self.sys.output_dim(), bounds.len()));
        }
        self.output_bounds = Some(bounds);
        Ok(self)
    }

    pub fn with_sequence_cap(mut self, cap: u64) -> Self {
        self.max_sequences = cap;
        self
    }

    /// Number of candidate input sequences, `(2^m)^N`.
    pub fn sequence_count(&self) -> u128 {
        let bits = (self.sys.input_bits() * self.horizon) as u32;
        if bits >= 128 {
            u128::MAX
        } else {
            1u128 << bits
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    pub inputs: Vec<InputVector>,
    pub cost: f64,
    /// Complete input sequences whose cost was evaluated.
    pub nodes_explored: u64,
}

/// Cycle references for predicted step `i` at time `k`: the state
/// `x̄_c((k+i) mod p)` and, for `i < horizon`, the input `ū_c((k+i) mod p)`.
pub fn reference_at(cycle: &LimitCycle, k: usize, i: usize, horizon: usize) -> (&Vector, Option<&InputVector>) {
    let phase = (k + i) % cycle.period();
    let input = (i < horizon).then(|| cycle.input_at(phase));
    (cycle.state_at(phase), input)
}

fn check_sequence(prob: &MpcProblem, x: &Vector, inputs: &[InputVector]) -> Result<()> {
    prob.sys.check_state(x)?;
    if inputs.len() != prob.horizon {
        return Err(Error::dimension("input sequence length", prob.horizon, inputs.len()));
    }
    for u in inputs {
        prob.sys.check_input(u)?;
    }
    Ok(())
}

/// Output-tracking cost of `inputs` from state `x` with previous input `u_prev`.
pub fn standard_cost(prob: &MpcProblem, x: &Vector, u_prev: &InputVector, inputs: &[InputVector]) -> Result<f64> {
    if !matches!(prob.reference, TrackingReference::ConstantOutput(_)) {
        return Err(Error::validation("reference", "standard cost needs a constant output reference"));
    }
    check_sequence(prob, x, inputs)?;
    prob.sys.check_input(u_prev)?;
    let horizon = Horizon::new(prob, x, 0, u_prev)?;
    let codes: Vec<usize> = inputs.iter().map(InputVector::code).collect();
    Ok(horizon.sequence_cost(&codes).0)
}

/// Limit-cycle tracking cost of `inputs` from state `x` at time `k`.
pub fn lc_cost(prob: &MpcProblem, x: &Vector, k: usize, inputs: &[InputVector]) -> Result<f64> {
    if prob.reference.cycle().is_none() {
        return Err(Error::validation("reference", "limit-cycle cost needs a cycle reference"));
    }
    check_sequence(prob, x, inputs)?;
    let zeros = InputVector::zeros(prob.sys.input_bits());
    let horizon = Horizon::new(prob, x, k, &zeros)?;
    let codes: Vec<usize> = inputs.iter().map(InputVector::code).collect();
    Ok(horizon.sequence_cost(&codes).0)
}

/// Cost of `inputs` under whichever reference the problem carries.
pub fn sequence_cost(prob: &MpcProblem, x: &Vector, k: usize, u_prev: &InputVector, inputs: &[InputVector]) -> Result<f64> {
    match prob.reference {
        TrackingReference::ConstantOutput(_) => standard_cost(prob, x, u_prev, inputs),
        TrackingReference::Cycle(_) => lc_cost(prob, x, k, inputs),
    }
}

/// Previous optimum advanced one step and completed with the reference input
/// `ū_c((k+N) mod p)`, the candidate used in the cost-decrease argument.
pub fn shifted_sequence(cycle: &LimitCycle, k: usize, optimal: &[InputVector]) -> Vec<InputVector> {
    let n = optimal.len();
    let mut shifted: Vec<InputVector> = optimal[1..].to_vec();
    shifted.push(cycle.input_at(k + n).clone());
    shifted
}

pub fn solve(prob: &MpcProblem, x: &Vector, k: usize, u_prev: &InputVector, solver: SolverChoice) -> Result<MpcSolution> {
    match solver {
        SolverChoice::Exhaustive => solve_exhaustive(prob, x, k, u_prev),
        SolverChoice::BranchAndBound => solve_branch_and_bound(prob, x, k, u_prev),
    }
}

/// Receding-horizon step: solves at time `k` and returns the first input of
/// the optimal sequence together with the full solution.
pub fn controller_step(
    prob: &MpcProblem,
    x: &Vector,
    k: usize,
    u_prev: &InputVector,
    solver: SolverChoice,
) -> Result<(InputVector, MpcSolution)> {
    let solution = solve(prob, x, k, u_prev, solver)?;
    Ok((solution.inputs[0].clone(), solution))
}
