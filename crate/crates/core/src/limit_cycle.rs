//! Periodic steady states of `x(k+1) = A x(k) + B u(k)` under p-periodic
//! binary inputs, and exhaustive selection of the best one.
//!
//! A p-periodic input sequence `ū(0..p)` induces exactly one p-periodic state
//! sequence when `I − A^p` is invertible:
//!
//! ```text
//! x̄(0)   = (I − A^p)⁻¹ · [A^{p−1}B  A^{p−2}B  …  B] · [ū(0); …; ū(p−1)]
//! x̄(i+1) = A x̄(i) + B ū(i)
//! ```
//!
//! Input sequences are numbered `c = 1 ..= (2^m)^p`: `c − 1` written in base
//! `2^m` with `p` digits, most significant digit first, each digit being an
//! input code (see [`InputVector`]).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{mode_of_input, DiscreteSystem, InputVector};
use crate::numerics::{CheckedLu, Matrix, Vector};
use crate::TIE_RELATIVE_TOLERANCE;

/// Absolute per-entry tolerance of the periodicity certificate.
pub const PERIODICITY_TOL: f64 = 1e-8;

/// Default cap on the number of candidate cycles enumerated.
pub const DEFAULT_CYCLE_CAP: u64 = 1 << 24;

/// A certified p-periodic state/input trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCycle {
    states: Vec<Vector>,
    inputs: Vec<InputVector>,
    index: u64,
    residual: f64,
}

impl LimitCycle {
    pub fn period(&self) -> usize {
        self.inputs.len()
    }

    pub fn states(&self) -> &[Vector] {
        &self.states
    }

    pub fn inputs(&self) -> &[InputVector] {
        &self.inputs
    }

    /// Enumeration id `c` of the input sequence.
    pub fn index(&self) -> u64 {
        self.index
    }

    /// Largest entry of `A x̄(p−1) + B ū(p−1) − x̄(0)` and of the
    /// intermediate transitions.
    pub fn certificate_residual(&self) -> f64 {
        self.residual
    }

    pub fn state_at(&self, phase: usize) -> &Vector {
        &self.states[phase % self.period()]
    }

    pub fn input_at(&self, phase: usize) -> &InputVector {
        &self.inputs[phase % self.period()]
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn input_bits(&self) -> usize {
        self.inputs[0].len()
    }

    /// The same cycle started `shift` phases later.
    pub fn rotated(&self, shift: usize) -> LimitCycle {
        let p = self.period();
        let states: Vec<Vector> = (0..p).map(|i| self.states[(i + shift) % p].clone()).collect();
        let inputs: Vec<InputVector> = (0..p).map(|i| self.inputs[(i + shift) % p].clone()).collect();
        let m = self.input_bits();
        LimitCycle {
            index: index_of_sequence(&inputs, m),
            states,
            inputs,
            residual: self.residual,
        }
    }

    pub fn outputs(&self, c: &Matrix) -> Vec<Vector> {
        self.states.iter().map(|x| c * x).collect()
    }

    /// Operation modes of the inputs (two-switch plants only).
    pub fn modes(&self) -> Result<Vec<u8>> {
        self.inputs.iter().map(mode_of_input).collect()
    }

    /// Re-simulates one period from `x̄(0)` and returns the largest deviation
    /// from the stored states, including the wrap-around back to `x̄(0)`.
    pub fn verify(&self, sys: &DiscreteSystem) -> Result<f64> {
        periodicity_residual(sys, &self.states, &self.inputs)
    }

    pub fn to_record(&self) -> CycleRecord {
        CycleRecord {
            period: self.period(),
            index: self.index,
            inputs: self.inputs.iter().map(|u| u.bits().to_vec()).collect(),
            states: self.states.iter().map(|x| x.iter().copied().collect()).collect(),
        }
    }

    /// Rebuilds a cycle from its serialised form; the certificate is
    /// re-checked against `sys`.
    pub fn from_record(record: &CycleRecord, sys: &DiscreteSystem) -> Result<Self> {
        if record.period == 0 || record.inputs.len() != record.period || record.states.len() != record.period {
            return Err(Error::validation(
                "cycle",
                format!(
                    "period {} does not match {} inputs and {} states",
                    record.period,
                    record.inputs.len(),
                    record.states.len()
                ),
            ));
        }
        let inputs = record
            .inputs
            .iter()
            .map(|bits| InputVector::new(bits.clone()))
            .collect::<Result<Vec<_>>>()?;
        let states: Vec<Vector> = record
            .states
            .iter()
            .map(|x| Vector::from_column_slice(x))
            .collect();
        for x in &states {
            sys.check_state(x)?;
        }
        for u in &inputs {
            sys.check_input(u)?;
        }
        let residual = periodicity_residual(sys, &states, &inputs)?;
        if residual > PERIODICITY_TOL {
            return Err(Error::Certificate {
                residual,
                tolerance: PERIODICITY_TOL,
            });
        }
        Ok(LimitCycle {
            index: index_of_sequence(&inputs, sys.input_bits()),
            states,
            inputs,
            residual,
        })
    }

    /// One CSV row per phase: `phase, x1..xn, u1..um, mode, y1..yq`.
    pub fn write_csv<W: Write>(&self, sys: &DiscreteSystem, writer: W) -> Result<()> {
        let n = self.state_dim();
        let m = self.input_bits();
        let q = sys.output_dim();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["phase".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        header.push("mode".into());
        header.extend((1..=q).map(|i| format!("y{i}")));
        w.write_record(&header)?;
        for (phase, (x, u)) in self.states.iter().zip(&self.inputs).enumerate() {
            let y = &sys.c * x;
            let mut row = vec![phase.to_string()];
            row.extend(x.iter().map(|v| format_real(*v)));
            row.extend(u.bits().iter().map(|b| b.to_string()));
            row.push(mode_of_input(u).map(|md| md.to_string()).unwrap_or_default());
            row.extend(y.iter().map(|v| format_real(*v)));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "limit cycle CSV".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// Serialised form of a [`LimitCycle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub period: usize,
    pub index: u64,
    pub inputs: Vec<Vec<u8>>,
    pub states: Vec<Vec<f64>>,
}

/// Seventeen significant digits, enough for `f64` values to round-trip.
pub(crate) fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn periodicity_residual(sys: &DiscreteSystem, states: &[Vector], inputs: &[InputVector]) -> Result<f64> {
    let p = states.len();
    let mut worst = 0.0_f64;
    for i in 0..p {
        let next = sys.step(&states[i], &inputs[i])?;
        worst = worst.max((next - &states[(i + 1) % p]).amax());
    }
    Ok(worst)
}

fn count_sequences(m: usize, p: usize) -> u128 {
    let bits = (m * p) as u32;
    if bits >= 128 {
        u128::MAX
    } else {
        1u128 << bits
    }
}

fn index_of_sequence(inputs: &[InputVector], m: usize) -> u64 {
    inputs
        .iter()
        .fold(0u64, |acc, u| acc.wrapping_shl(m as u32) | u.code() as u64)
        .wrapping_add(1)
}

fn digits_of_index(c: u64, m: usize, p: usize) -> impl Iterator<Item = usize> {
    let base_mask = (1u64 << m) - 1;
    let zero_based = c - 1;
    (0..p).map(move |i| ((zero_based >> (m * (p - 1 - i))) & base_mask) as usize)
}

/// Input sequence number `c` (1-based) of length `p` over `{0,1}^m`.
pub fn input_sequence_from_index(c: u64, m: usize, p: usize) -> Result<Vec<InputVector>> {
    let total = count_sequences(m, p);
    if m * p > 63 {
        return Err(Error::Capacity {
            required: total,
            cap: u64::MAX,
        });
    }
    if c == 0 || c as u128 > total {
        return Err(Error::validation("c", format!("must lie in 1..={total}, got {c}")));
    }
    Ok(digits_of_index(c, m, p).map(|d| InputVector::from_code(d, m)).collect())
}

/// The cycle induced by a p-periodic input sequence.
pub fn cycle_from_inputs(sys: &DiscreteSystem, inputs: &[InputVector]) -> Result<LimitCycle> {
    let p = inputs.len();
    if p == 0 {
        return Err(Error::validation("period", "must be at least 1"));
    }
    for u in inputs {
        sys.check_input(u)?;
    }
    let n = sys.state_dim();
    // Horner: s = Σ A^{p−1−i} B ū(i)
    let mut forced = Vector::zeros(n);
    for u in inputs {
        forced = &sys.a * forced + &sys.b * u.to_vector();
    }
    let a_pow = sys.a.pow(p as u32);
    let lu = CheckedLu::new("I - A^p", &(Matrix::identity(n, n) - a_pow))?;
    let x0 = lu.solve_vector(&forced)?;

    let mut states = Vec::with_capacity(p);
    states.push(x0);
    for u in &inputs[..p - 1] {
        let next = sys.step(states.last().expect("non-empty"), u)?;
        states.push(next);
    }
    let residual = periodicity_residual(sys, &states, inputs)?;
    if residual > PERIODICITY_TOL {
        return Err(Error::Certificate {
            residual,
            tolerance: PERIODICITY_TOL,
        });
    }
    Ok(LimitCycle {
        index: index_of_sequence(inputs, sys.input_bits()),
        states,
        inputs: inputs.to_vec(),
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleNorm {
    TwoNorm,
    OneNorm,
    InfNorm,
}

impl CycleNorm {
    fn apply(self, v: &Vector) -> f64 {
        match self {
            CycleNorm::TwoNorm => v.norm(),
            CycleNorm::OneNorm => v.iter().map(|e| e.abs()).sum(),
            CycleNorm::InfNorm => v.amax(),
        }
    }
}

/// Selection criterion: mean over the cycle of `‖Γ(C x̄(n) − y_ref)‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleCriterion {
    pub y_ref: Vector,
    pub gamma: Matrix,
    pub norm: CycleNorm,
}

impl CycleCriterion {
    pub fn new(y_ref: Vector, gamma: Matrix, norm: CycleNorm) -> Result<Self> {
        if !gamma.is_square() || gamma.nrows() != y_ref.len() {
            return Err(Error::dimension(
                "Gamma",
                format!("{0}x{0}", y_ref.len()),
                format!("{}x{}", gamma.nrows(), gamma.ncols()),
            ));
        }
        crate::numerics::ensure_finite("Gamma", &gamma)?;
        Ok(Self { y_ref, gamma, norm })
    }

    fn check(&self, c: &Matrix) -> Result<()> {
        if c.nrows() != self.y_ref.len() {
            return Err(Error::dimension("y_ref", c.nrows(), self.y_ref.len()));
        }
        Ok(())
    }

    fn phase_cost(&self, c: &Matrix, x: &Vector) -> f64 {
        self.norm.apply(&(&self.gamma * (c * x - &self.y_ref)))
    }
}

pub fn cycle_cost(cycle: &LimitCycle, crit: &CycleCriterion, c: &Matrix) -> Result<f64> {
    crit.check(c)?;
    if c.ncols() != cycle.state_dim() {
        return Err(Error::dimension("C columns", cycle.state_dim(), c.ncols()));
    }
    let total: f64 = cycle.states.iter().map(|x| crit.phase_cost(c, x)).sum();
    Ok(total / cycle.period() as f64)
}

/// Peak-to-peak value of every output over one period.
pub fn cycle_ripple(cycle: &LimitCycle, c: &Matrix) -> Vec<f64> {
    let outputs = cycle.outputs(c);
    (0..c.nrows())
        .map(|j| {
            let (lo, hi) = outputs
                .iter()
                .map(|y| y[j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .collect()
}

/// Precomputed data for cheap per-candidate cycle evaluation.
struct CycleFamily<'a> {
    sys: &'a DiscreteSystem,
    m: usize,
    p: usize,
    /// `initial[i][d]` = `(I − A^p)⁻¹ A^{p−1−i} B u_d`
    initial: Vec<Vec<Vector>>,
    responses: Vec<Vector>,
}

impl<'a> CycleFamily<'a> {
    fn new(sys: &'a DiscreteSystem, p: usize) -> Result<Self> {
        let n = sys.state_dim();
        let m = sys.input_bits();
        let lu = CheckedLu::new("I - A^p", &(Matrix::identity(n, n) - sys.a.pow(p as u32)))?;
        let responses = sys.input_responses();
        let mut initial = vec![Vec::new(); p];
        let mut a_pow = Matrix::identity(n, n);
        for i in (0..p).rev() {
            initial[i] = responses
                .iter()
                .map(|bu| lu.solve_vector(&(&a_pow * bu)))
                .collect::<Result<Vec<_>>>()?;
            a_pow = &sys.a * a_pow;
        }
        Ok(Self {
            sys,
            m,
            p,
            initial,
            responses,
        })
    }

    fn cost(&self, c: u64, crit: &CycleCriterion) -> f64 {
        let digits: Vec<usize> = digits_of_index(c, self.m, self.p).collect();
        let mut x = Vector::zeros(self.sys.state_dim());
        for (i, &d) in digits.iter().enumerate() {
            x += &self.initial[i][d];
        }
        let mut total = crit.phase_cost(&self.sys.c, &x);
        for &d in &digits[..self.p - 1] {
            x = &self.sys.a * &x + &self.responses[d];
            total += crit.phase_cost(&self.sys.c, &x);
        }
        total / self.p as f64
    }
}

/// Exhaustive minimiser of [`cycle_cost`] over all `(2^m)^p` input sequences.
///
/// Costs within a relative [`TIE_RELATIVE_TOLERANCE`] of the minimum count as
/// ties and the smallest index `c` wins, so the result does not depend on
/// rounding noise or on how the enumeration is split across threads.
pub fn optimal_limit_cycle(sys: &DiscreteSystem, crit: &CycleCriterion, p: usize) -> Result<LimitCycle> {
    optimal_limit_cycle_capped(sys, crit, p, DEFAULT_CYCLE_CAP)
}

pub fn optimal_limit_cycle_capped(
    sys: &DiscreteSystem,
    crit: &CycleCriterion,
    p: usize,
    cap: u64,
) -> Result<LimitCycle> {
    if p == 0 {
        return Err(Error::validation("cycle_search.p", "must be at least 1"));
    }
    crit.check(&sys.c)?;
    let total = count_sequences(sys.input_bits(), p);
    if total > cap as u128 {
        return Err(Error::Capacity { required: total, cap });
    }
    let rho = sys.spectral_radius()?;
    if rho >= 1.0 {
        return Err(Error::Unstable { spectral_radius: rho });
    }
    let family = CycleFamily::new(sys, p)?;
    let total = total as u64;

    let best = (1..=total)
        .into_par_iter()
        .map(|c| family.cost(c, crit))
        .reduce(|| f64::INFINITY, f64::min);
    let threshold = best + TIE_RELATIVE_TOLERANCE * best.abs();
    let winner = (1..=total)
        .into_par_iter()
        .find_first(|&c| family.cost(c, crit) <= threshold)
        .expect("the minimiser satisfies its own threshold");

    let inputs = input_sequence_from_index(winner, sys.input_bits(), p)?;
    cycle_from_inputs(sys, &inputs)
}
