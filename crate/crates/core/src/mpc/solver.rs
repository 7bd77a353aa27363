use crate::error::{Error, Result};
use crate::model::InputVector;
use crate::numerics::Vector;
use crate::TIE_RELATIVE_TOLERANCE;

use super::{Horizon, MpcProblem, MpcSolution};

/// Strict improvement beyond the tie tolerance. Both solvers accept a new
/// incumbent only under this rule, and since sequences are visited in
/// lexicographic order, the earliest of a group of near-equal sequences wins.
fn improves(candidate: f64, incumbent: Option<f64>) -> bool {
    match incumbent {
        None => true,
        Some(best) => candidate < acceptance_threshold(best),
    }
}

fn acceptance_threshold(best: f64) -> f64 {
    best - TIE_RELATIVE_TOLERANCE * best.abs()
}

fn decode(index: u64, m: usize, horizon: usize, codes: &mut [usize]) {
    let mask = (1u64 << m) - 1;
    for (i, c) in codes.iter_mut().enumerate() {
        *c = ((index >> (m * (horizon - 1 - i))) & mask) as usize;
    }
}

fn into_solution(codes: &[usize], m: usize, cost: f64, nodes: u64) -> MpcSolution {
    MpcSolution {
        inputs: codes.iter().map(|&d| InputVector::from_code(d, m)).collect(),
        cost,
        nodes_explored: nodes,
    }
}

/// Evaluates every input sequence in lexicographic order (the sequence read
/// as a base-`2^m` number with `u_0` most significant).
pub fn solve_exhaustive(prob: &MpcProblem, x: &Vector, k: usize, u_prev: &InputVector) -> Result<MpcSolution> {
    let total = prob.sequence_count();
    if total > prob.max_sequences as u128 {
        return Err(Error::Capacity {
            required: total,
            cap: prob.max_sequences,
        });
    }
    let horizon = Horizon::new(prob, x, k, u_prev)?;
    let m = prob.sys.input_bits();
    let total = total as u64;
    let mut codes = vec![0usize; prob.horizon];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for index in 0..total {
        decode(index, m, prob.horizon, &mut codes);
        let (cost, feasible) = horizon.sequence_cost(&codes);
        if feasible && improves(cost, best.as_ref().map(|b| b.0)) {
            best = Some((cost, codes.clone()));
        }
    }
    let (cost, codes) = best.ok_or(Error::Infeasible { step: None })?;
    Ok(into_solution(&codes, m, cost, total))
}

struct Search<'a> {
    horizon: &'a Horizon,
    /// predicted states, `(N+1)·n`, row `i` is `x_i`
    states: Vec<f64>,
    codes: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    leaves: u64,
}

impl Search<'_> {
    fn state(&self, i: usize) -> &[f64] {
        let n = self.horizon.state_dim();
        &self.states[i * n..(i + 1) * n]
    }

    fn descend(&mut self, depth: usize, accumulated: f64) {
        let n = self.horizon.state_dim();
        let last = self.horizon.horizon();
        if depth == last {
            self.leaves += 1;
            let cost = accumulated + self.horizon.terminal(self.state(depth));
            if improves(cost, self.best.as_ref().map(|b| b.0)) {
                self.best = Some((cost, self.codes.clone()));
            }
            return;
        }
        let prev = if depth == 0 {
            self.horizon.initial_prev()
        } else {
            self.codes[depth - 1]
        };
        for code in 0..self.horizon.alphabet() {
            let stage = self.horizon.stage(depth, self.state(depth), code, prev);
            let bound = accumulated + stage;
            let (head, tail) = self.states.split_at_mut((depth + 1) * n);
            self.horizon.advance(&head[depth * n..], code, &mut tail[..n]);
            if let Some((best, _)) = &self.best {
                // stage costs are non-negative and the relaxed cost-to-go
                // never exceeds the true one, so no completion of this
                // prefix can cost less than `optimistic`
                let optimistic = bound + self.horizon.cost_to_go_bound(depth + 1, self.state(depth + 1), code);
                if optimistic >= acceptance_threshold(*best) {
                    continue;
                }
            }
            if !self.horizon.feasible(self.state(depth + 1)) {
                continue;
            }
            self.codes[depth] = code;
            self.descend(depth + 1, bound);
        }
    }
}

/// Depth-first branch-and-bound over the input tree, children in ascending
/// code order. A prefix is pruned once its accumulated stage cost plus a
/// lower bound on the remaining cost (the optimum over real-valued inputs)
/// can no longer beat the incumbent. Leaf costs are summed exactly as in
/// [`solve_exhaustive`], so both return the same sequence and cost; this one
/// evaluates far fewer leaves.
pub fn solve_branch_and_bound(prob: &MpcProblem, x: &Vector, k: usize, u_prev: &InputVector) -> Result<MpcSolution> {
    let horizon = Horizon::new(prob, x, k, u_prev)?;
    let n = horizon.state_dim();
    let mut states = vec![0.0; (prob.horizon + 1) * n];
    states[..n].copy_from_slice(horizon.initial_state());
    let mut search = Search {
        horizon: &horizon,
        states,
        codes: vec![0; prob.horizon],
        best: None,
        leaves: 0,
    };
    search.descend(0, 0.0);
    let leaves = search.leaves;
    let (cost, codes) = search.best.ok_or(Error::Infeasible { step: None })?;
    Ok(into_solution(&codes, prob.sys.input_bits(), cost, leaves))
}
