//! Closed-loop simulation and steady-state metrics.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::limit_cycle::{format_real, LimitCycle};
use crate::model::{mode_of_input, InputVector};
use crate::mpc::{controller_step, MpcProblem, SolverChoice};
use crate::numerics::Vector;

/// Relative slack allowed in the cost-decrease check, `1e−8·(1 + J*)`.
pub const DECREASE_TOL: f64 = 1e-8;

/// Closed-loop record. `states` holds one more entry than `inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vector>,
    pub inputs: Vec<InputVector>,
    /// `C x(k)` for every recorded state.
    pub outputs: Vec<Vector>,
    /// Optimal cost `J*` at every step.
    pub costs: Vec<f64>,
    /// Optimal input sequence at every step.
    pub plans: Vec<Vec<InputVector>>,
    pub nodes_explored: Vec<u64>,
    /// Operation modes, for two-switch plants.
    pub modes: Option<Vec<u8>>,
    pub sample_period: f64,
    pub solve_time: Duration,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    pub fn mean_solve_time(&self) -> Duration {
        if self.inputs.is_empty() {
            Duration::ZERO
        } else {
            self.solve_time / self.inputs.len() as u32
        }
    }

    /// Header plus one row per recorded state:
    /// `k, t_seconds, x1..xn, u1..um, mode, y1..yq, J_star`. The final state
    /// has no input, mode or cost, so those fields are left empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let n = self.states[0].len();
        let m = self.inputs.first().map_or(0, InputVector::len);
        let q = self.outputs[0].len();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["k".to_string(), "t_seconds".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        header.push("mode".into());
        header.extend((1..=q).map(|i| format!("y{i}")));
        header.push("J_star".into());
        w.write_record(&header)?;
        for (k, x) in self.states.iter().enumerate() {
            let mut row = vec![k.to_string(), format_real(k as f64 * self.sample_period)];
            row.extend(x.iter().map(|v| format_real(*v)));
            match self.inputs.get(k) {
                Some(u) => row.extend(u.bits().iter().map(|b| b.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), m)),
            }
            row.push(
                self.modes
                    .as_ref()
                    .and_then(|modes| modes.get(k))
                    .map(|md| md.to_string())
                    .unwrap_or_default(),
            );
            row.extend(self.outputs[k].iter().map(|v| format_real(*v)));
            row.push(self.costs.get(k).map(|j| format_real(*j)).unwrap_or_default());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "trajectory CSV".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// Runs the receding-horizon loop for `steps` steps from `x0`. Time `k = 0`
/// is phase 0 of a cycle reference, and the input preceding the first step
/// is taken as all zeros.
pub fn simulate(prob: &MpcProblem, x0: &Vector, steps: usize, solver: SolverChoice) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::validation("sim.steps", "must be at least 1"));
    }
    let sys = &prob.sys;
    sys.check_state(x0)?;
    let m = sys.input_bits();
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps);
    let mut costs = Vec::with_capacity(steps);
    let mut plans = Vec::with_capacity(steps);
    let mut nodes = Vec::with_capacity(steps);
    let mut solve_time = Duration::ZERO;
    states.push(x0.clone());
    let mut u_prev = InputVector::zeros(m);
    for k in 0..steps {
        let x = &states[k];
        let started = Instant::now();
        let (u, solution) = controller_step(prob, x, k, &u_prev, solver).map_err(|e| match e {
            Error::Infeasible { .. } => Error::Infeasible { step: Some(k) },
            other => other,
        })?;
        solve_time += started.elapsed();
        let next = sys.step(x, &u)?;
        states.push(next);
        costs.push(solution.cost);
        nodes.push(solution.nodes_explored);
        plans.push(solution.inputs);
        u_prev = u.clone();
        inputs.push(u);
    }
    let outputs = states.iter().map(|x| &sys.c * x).collect();
    let modes = (m == 2).then(|| inputs.iter().map(|u| mode_of_input(u).expect("m = 2")).collect());
    Ok(Trajectory {
        states,
        inputs,
        outputs,
        costs,
        plans,
        nodes_explored: nodes,
        modes,
        sample_period: sys.sample_period,
        solve_time,
    })
}

/// `‖x(j) − x̄_c(j mod p)‖∞` for every recorded state.
pub fn cycle_deviation(traj: &Trajectory, cycle: &LimitCycle) -> Vec<f64> {
    traj.states
        .iter()
        .enumerate()
        .map(|(j, x)| (x - cycle.state_at(j)).amax())
        .collect()
}

/// Smallest `k` such that the state stays within `tol` of the phase-aligned
/// cycle for the `2p` samples `k..k+2p`.
pub fn detect_convergence(traj: &Trajectory, cycle: &LimitCycle, tol: f64) -> Option<usize> {
    let dev = cycle_deviation(traj, cycle);
    let span = 2 * cycle.period();
    if dev.len() < span {
        return None;
    }
    (0..=dev.len() - span).find(|&k| dev[k..k + span].iter().all(|&d| d <= tol))
}

/// Peak-to-peak of each output over the final `window` recorded samples.
pub fn steady_state_ripple(traj: &Trajectory, window: usize) -> Result<Vec<f64>> {
    let tail = output_window(traj, window)?;
    let q = traj.outputs[0].len();
    Ok((0..q)
        .map(|j| {
            let (lo, hi) = tail
                .iter()
                .map(|y| y[j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .collect())
}

fn output_window(traj: &Trajectory, window: usize) -> Result<&[Vector]> {
    let len = traj.outputs.len();
    if window == 0 || window > len {
        return Err(Error::validation(
            "sim.ripple_window",
            format!("must lie in 1..={len}, got {window}"),
        ));
    }
    Ok(&traj.outputs[len - window..])
}

pub fn mean_output(traj: &Trajectory, window: usize) -> Result<Vec<f64>> {
    let tail = output_window(traj, window)?;
    let q = traj.outputs[0].len();
    Ok((0..q)
        .map(|j| tail.iter().map(|y| y[j]).sum::<f64>() / tail.len() as f64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecreaseReport {
    /// Earliest step from which `J*` never increases beyond tolerance.
    pub monotone_after: Option<usize>,
    /// Largest raw increase `J*(k+1) − J*(k)`, zero if none.
    pub max_violation: f64,
}

pub fn lyapunov_decrease_report(traj: &Trajectory) -> DecreaseReport {
    let costs = &traj.costs;
    let mut last_violation = None;
    let mut max_violation = 0.0_f64;
    for k in 0..costs.len().saturating_sub(1) {
        let increase = costs[k + 1] - costs[k];
        max_violation = max_violation.max(increase);
        if increase > DECREASE_TOL * (1.0 + costs[k]) {
            last_violation = Some(k);
        }
    }
    let monotone_after = match last_violation {
        None => Some(0),
        Some(k) if k + 2 < costs.len() => Some(k + 1),
        Some(_) => None,
    };
    DecreaseReport {
        monotone_after,
        max_violation,
    }
}

/// Smallest period `≤ p_max` with which the tail of the mode sequence
/// repeats exactly, returned in the rotation whose first entry is the mode
/// applied at steps `k ≡ 0 (mod period)`.
///
/// The tail examined is the final `3·p_max` modes (or the whole sequence if
/// shorter), and must span at least three periods. Checking a fixed window
/// rather than three periods of each candidate keeps runs of a repeated mode
/// inside a longer pattern, like the five 1s of `{3,1,1,1,1,1}`, from being
/// mistaken for a shorter cycle.
pub fn detect_mode_cycle(traj: &Trajectory, p_max: usize) -> Option<Vec<u8>> {
    let modes = traj.modes.as_ref()?;
    let len = modes.len();
    let start = len.saturating_sub(3 * p_max);
    (1..=p_max).find_map(|period| {
        if len - start < 3 * period {
            return None;
        }
        let periodic = (start + period..len).all(|j| modes[j] == modes[j - period]);
        periodic.then(|| {
            let mut cycle = vec![0u8; period];
            for j in len - period..len {
                cycle[j % period] = modes[j];
            }
            cycle
        })
    })
}

/// True when `a` is a cyclic rotation of `b`.
pub fn is_rotation_of(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && (a.is_empty() || (0..b.len()).any(|s| (0..a.len()).all(|i| a[i] == b[(i + s) % b.len()])))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub convergence_tol: f64,
    pub window: usize,
    pub mode_period_max: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            convergence_tol: 1e-3,
            window: 60,
            mode_period_max: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyStateReport {
    pub steps: usize,
    pub converged_at: Option<usize>,
    /// Whether `converged_at` was found; when false the ripple window is
    /// simply the final samples of a trajectory that never settled onto the
    /// reference cycle (always false for output-tracking runs).
    pub converged: bool,
    pub window: usize,
    pub ripple: Vec<f64>,
    pub mean_output: Vec<f64>,
    /// `max_k y(k) − mean steady-state y`, per output.
    pub overshoot: Vec<f64>,
    pub mode_cycle: Option<Vec<u8>>,
    pub cost_monotone_after: Option<usize>,
    pub max_cost_increase: f64,
    pub final_cycle_deviation: Option<f64>,
    pub mean_nodes_explored: f64,
    pub mean_solve_seconds: f64,
}

pub fn steady_state_report(traj: &Trajectory, cycle: Option<&LimitCycle>, opts: &ReportOptions) -> Result<SteadyStateReport> {
    let ripple = steady_state_ripple(traj, opts.window)?;
    let mean = mean_output(traj, opts.window)?;
    let q = mean.len();
    let overshoot = (0..q)
        .map(|j| traj.outputs.iter().map(|y| y[j]).fold(f64::NEG_INFINITY, f64::max) - mean[j])
        .collect();
    let converged_at = cycle.and_then(|c| detect_convergence(traj, c, opts.convergence_tol));
    let decrease = lyapunov_decrease_report(traj);
    let steps = traj.steps();
    Ok(SteadyStateReport {
        steps,
        converged_at,
        converged: converged_at.is_some(),
        window: opts.window,
        ripple,
        mean_output: mean,
        overshoot,
        mode_cycle: detect_mode_cycle(traj, opts.mode_period_max),
        cost_monotone_after: decrease.monotone_after,
        max_cost_increase: decrease.max_violation,
        final_cycle_deviation: cycle.map(|c| *cycle_deviation(traj, c).last().expect("non-empty")),
        mean_nodes_explored: traj.nodes_explored.iter().sum::<u64>() as f64 / steps as f64,
        mean_solve_seconds: traj.mean_solve_time().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit_cycle::cycle_from_inputs;
    use crate::model::DiscreteSystem;
    use crate::mpc::{MpcWeights, TrackingReference};
    use crate::numerics::Matrix;

    fn toy() -> DiscreteSystem {
        let a = Matrix::from_row_slice(2, 2, &[0.6, 0.2, -0.1, 0.5]);
        let b = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 1.0]);
        DiscreteSystem::new(a, b, Matrix::from_row_slice(1, 2, &[1.0, -1.0]), 0.1).unwrap()
    }

    fn cycle_problem(sys: &DiscreteSystem, cycle: LimitCycle, horizon: usize) -> MpcProblem {
        let weights = MpcWeights::new(Matrix::identity(2, 2), Matrix::identity(2, 2) * 0.1, Matrix::identity(2, 2) * 5.0)
            .unwrap();
        MpcProblem::new(sys.clone(), horizon, weights, TrackingReference::Cycle(cycle)).unwrap()
    }

    fn traj_with(outputs: Vec<f64>, costs: Vec<f64>, modes: Option<Vec<u8>>) -> Trajectory {
        let len = outputs.len();
        Trajectory {
            states: outputs.iter().map(|y| Vector::from_element(1, *y)).collect(),
            inputs: vec![InputVector::zeros(2); len - 1],
            outputs: outputs.iter().map(|y| Vector::from_element(1, *y)).collect(),
            costs,
            plans: vec![],
            nodes_explored: vec![1; len - 1],
            modes,
            sample_period: 1.0,
            solve_time: Duration::ZERO,
        }
    }

    #[test]
    fn single_step_shapes() {
        let sys = toy();
        let cyc = cycle_from_inputs(&sys, &[InputVector::from_code(1, 2), InputVector::from_code(2, 2)]).unwrap();
        let prob = cycle_problem(&sys, cyc, 2);
        let traj = simulate(&prob, &Vector::zeros(2), 1, SolverChoice::BranchAndBound).unwrap();
        assert_eq!(traj.inputs.len(), 1);
        assert_eq!(traj.states.len(), 2);
        assert!(simulate(&prob, &Vector::zeros(2), 0, SolverChoice::BranchAndBound).is_err());
    }

    #[test]
    fn start_on_cycle_stays_on_cycle() {
        let sys = toy();
        let cyc = cycle_from_inputs(
            &sys,
            &[InputVector::from_code(1, 2), InputVector::from_code(3, 2), InputVector::from_code(0, 2)],
        )
        .unwrap();
        let prob = cycle_problem(&sys, cyc.clone(), 3);
        let traj = simulate(&prob, &cyc.states()[0].clone(), 30, SolverChoice::BranchAndBound).unwrap();
        for (k, u) in traj.inputs.iter().enumerate() {
            assert_eq!(u, cyc.input_at(k));
        }
        assert!(cycle_deviation(&traj, &cyc).iter().all(|d| *d < 1e-9));
        assert_eq!(detect_convergence(&traj, &cyc, 1e-6), Some(0));
        let report = lyapunov_decrease_report(&traj);
        assert_eq!(report.monotone_after, Some(0));
        assert!(traj.costs.iter().all(|j| *j < 1e-12));
    }

    #[test]
    fn diverging_trajectory_never_converges() {
        let sys = toy();
        let cyc = cycle_from_inputs(&sys, &[InputVector::zeros(2)]).unwrap();
        let mut traj = simulate(&cycle_problem(&sys, cyc.clone(), 1), &Vector::zeros(2), 10, SolverChoice::Exhaustive)
            .unwrap();
        for (k, x) in traj.states.iter_mut().enumerate() {
            x[0] = 2f64.powi(k as i32);
        }
        assert_eq!(detect_convergence(&traj, &cyc, 1e-3), None);
    }

    #[test]
    fn ripple_and_window_checks() {
        let t = traj_with(vec![5.0; 8], vec![0.0; 7], None);
        assert_eq!(steady_state_ripple(&t, 4).unwrap(), vec![0.0]);
        assert!(steady_state_ripple(&t, 9).is_err());
        let t = traj_with(vec![0.0, 9.0, 1.0, 3.0, 2.0], vec![0.0; 4], None);
        assert_eq!(steady_state_ripple(&t, 3).unwrap(), vec![2.0]);
        assert_eq!(mean_output(&t, 2).unwrap(), vec![2.5]);
    }

    #[test]
    fn decrease_report_finds_last_violation() {
        let t = traj_with(vec![0.0; 6], vec![5.0, 6.0, 4.0, 3.0, 3.0], None);
        let r = lyapunov_decrease_report(&t);
        assert_eq!(r.monotone_after, Some(1));
        assert_eq!(r.max_violation, 1.0);
        let t = traj_with(vec![0.0; 4], vec![3.0, 2.0, 4.0], None);
        assert_eq!(lyapunov_decrease_report(&t).monotone_after, None);
    }

    #[test]
    fn mode_cycle_detection() {
        let t = traj_with(vec![0.0; 11], vec![0.0; 10], Some(vec![1; 10]));
        assert_eq!(detect_mode_cycle(&t, 6), Some(vec![1]));
        // steps 0..18 of a period-6 pattern whose phase 0 is mode 3
        let pattern = [3, 2, 3, 1, 1, 1];
        let modes: Vec<u8> = (0..20).map(|k| pattern[k % 6]).collect();
        let t = traj_with(vec![0.0; 21], vec![0.0; 20], Some(modes));
        assert_eq!(detect_mode_cycle(&t, 12), Some(pattern.to_vec()));
        assert_eq!(detect_mode_cycle(&t, 5), None);
        // a run of equal modes inside a longer period is not a period-1 cycle
        let runs = [3, 1, 1, 1, 1, 1];
        let modes: Vec<u8> = (0..100).map(|k| runs[k % 6]).collect();
        let t = traj_with(vec![0.0; 101], vec![0.0; 100], Some(modes));
        assert_eq!(detect_mode_cycle(&t, 12), Some(runs.to_vec()));
        assert!(is_rotation_of(&[1, 1, 3, 2, 3, 1], &pattern));
        assert!(!is_rotation_of(&[1, 3, 2, 3, 1, 2], &pattern));
    }

    #[test]
    fn transitions_replay_exactly() {
        let sys = toy();
        let cyc = cycle_from_inputs(&sys, &[InputVector::from_code(2, 2), InputVector::from_code(1, 2)]).unwrap();
        let traj = simulate(&cycle_problem(&sys, cyc, 3), &Vector::zeros(2), 25, SolverChoice::BranchAndBound).unwrap();
        for k in 0..traj.steps() {
            assert_eq!(sys.step(&traj.states[k], &traj.inputs[k]).unwrap(), traj.states[k + 1]);
        }
    }

    #[test]
    fn csv_round_trips_bitwise() {
        let sys = toy();
        let cyc = cycle_from_inputs(&sys, &[InputVector::from_code(2, 2), InputVector::from_code(1, 2)]).unwrap();
        let traj = simulate(&cycle_problem(&sys, cyc, 2), &Vector::from_vec(vec![0.3, -1.7]), 12, SolverChoice::BranchAndBound)
            .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let mut reader = csv::Reader::from_reader(buf.as_slice());
        let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(header, ["k", "t_seconds", "x1", "x2", "u1", "u2", "mode", "y1", "J_star"]);
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 13);
        for (k, row) in rows.iter().enumerate() {
            let x1: f64 = row[2].parse().unwrap();
            let x2: f64 = row[3].parse().unwrap();
            assert_eq!(x1.to_bits(), traj.states[k][0].to_bits());
            assert_eq!(x2.to_bits(), traj.states[k][1].to_bits());
            if k < 12 {
                let j: f64 = row[8].parse().unwrap();
                assert_eq!(j.to_bits(), traj.costs[k].to_bits());
            } else {
                assert_eq!(&row[8], "");
            }
        }
    }
}
