use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::limit_cycle::{
    cycle_cost, cycle_from_inputs, cycle_ripple, optimal_limit_cycle_capped, CycleCriterion, CycleRecord,
    LimitCycle, DEFAULT_CYCLE_CAP,
};
use crate::model::{build_amplifier, zoh_discretize, ContinuousSystem, DiscreteSystem, InputVector};
use crate::mpc::{BoxBounds, MpcProblem, MpcWeights, TrackingReference};
use crate::numerics::{matrix_from_rows, matrix_to_rows, Matrix, Vector};
use crate::sim::{simulate, steady_state_report, ReportOptions, SteadyStateReport, Trajectory};
use crate::terminal_cost::{compute_terminal_p, verify_terminal_p};

use super::{
    BoundsConfig, ControllerKind, CycleSource, DiscreteConfig, MpcConfig, PlantConfig, Rows, RunConfig, RunContext,
    TerminalWeightConfig,
};

fn write_artifact(ctx: &RunContext, name: &str, contents: &[u8]) -> Result<()> {
    let Some(dir) = &ctx.out_dir else {
        return Ok(());
    };
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| Error::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(io_err(&path))
}

fn write_json<T: Serialize>(ctx: &RunContext, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_artifact(ctx, name, text.as_bytes())
}

fn required<'a, T>(value: Option<&'a T>, field: &str) -> Result<&'a T> {
    value.ok_or_else(|| Error::validation(field, "required for this command"))
}

/// Discrete plant described by the configuration, discretising with a
/// zero-order hold at `sampling.f_s` where needed.
pub fn build_plant(cfg: &RunConfig) -> Result<DiscreteSystem> {
    let f_s = || required(cfg.sampling.as_ref(), "sampling.f_s").map(|s| s.f_s);
    match &cfg.plant {
        PlantConfig::Amplifier(params) => {
            params.validate("plant.amplifier")?;
            zoh_discretize(&build_amplifier(params)?, f_s()?)
        }
        PlantConfig::Continuous(c) => {
            let sys = ContinuousSystem::new(
                matrix_from_rows("plant.continuous.A", &c.a)?,
                matrix_from_rows("plant.continuous.B", &c.b)?,
                matrix_from_rows("plant.continuous.C", &c.c)?,
            )?;
            zoh_discretize(&sys, f_s()?)
        }
        PlantConfig::Discrete(d) => DiscreteSystem::new(
            matrix_from_rows("plant.discrete.A", &d.a)?,
            matrix_from_rows("plant.discrete.B", &d.b)?,
            matrix_from_rows("plant.discrete.C", &d.c)?,
            d.sample_period,
        )
        .map_err(|e| match e {
            Error::Validation { field, reason } if field == "sample_period" => {
                Error::validation("plant.discrete.sample_period", reason)
            }
            other => other,
        }),
    }
}

fn y_ref(cfg: &RunConfig, sys: &DiscreteSystem) -> Result<Vector> {
    let values = cfg
        .reference
        .as_ref()
        .and_then(|r| r.y_ref.as_ref())
        .ok_or_else(|| Error::validation("reference.y_ref", "required for this command"))?;
    if values.len() != sys.output_dim() {
        return Err(Error::dimension("reference.y_ref", sys.output_dim(), values.len()));
    }
    Ok(Vector::from_column_slice(values))
}

fn search_criterion(cfg: &RunConfig, sys: &DiscreteSystem) -> Result<(CycleCriterion, usize, u64)> {
    let search = required(cfg.cycle_search.as_ref(), "cycle_search")?;
    let y = y_ref(cfg, sys)?;
    let gamma = match &search.gamma {
        Some(rows) => matrix_from_rows("cycle_search.Gamma", rows)?,
        None => Matrix::identity(y.len(), y.len()),
    };
    let crit = CycleCriterion::new(y, gamma, search.norm)?;
    Ok((crit, search.p, search.cap.unwrap_or(DEFAULT_CYCLE_CAP)))
}

fn search_cycle(cfg: &RunConfig, sys: &DiscreteSystem) -> Result<LimitCycle> {
    let (crit, p, cap) = search_criterion(cfg, sys)?;
    optimal_limit_cycle_capped(sys, &crit, p, cap)
}

/// The cycle reference named by `reference.cycle`, if any.
pub fn build_cycle(cfg: &RunConfig, sys: &DiscreteSystem, ctx: &RunContext) -> Result<Option<LimitCycle>> {
    let Some(source) = cfg.reference.as_ref().and_then(|r| r.cycle.as_ref()) else {
        return Ok(None);
    };
    let cycle = match source {
        CycleSource::Search => search_cycle(cfg, sys)?,
        CycleSource::Inputs(rows) => {
            if rows.is_empty() {
                return Err(Error::validation("reference.cycle.inputs", "needs at least one input"));
            }
            let inputs = rows
                .iter()
                .enumerate()
                .map(|(i, bits)| {
                    InputVector::new(bits.clone()).map_err(|e| Error::validation(format!("reference.cycle.inputs[{i}]"), e.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            cycle_from_inputs(sys, &inputs)?
        }
        CycleSource::File(path) => {
            let path = ctx.resolve(path);
            let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            let record: CycleRecord = serde_json::from_str(&text)?;
            LimitCycle::from_record(&record, sys)?
        }
    };
    Ok(Some(cycle))
}

fn bounds(field: &str, cfg: &BoundsConfig) -> Result<BoxBounds> {
    if cfg.lower.len() != cfg.upper.len() {
        return Err(Error::dimension(field, cfg.lower.len(), cfg.upper.len()));
    }
    let lower = Vector::from_iterator(cfg.lower.len(), cfg.lower.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)));
    let upper = Vector::from_iterator(cfg.upper.len(), cfg.upper.iter().map(|v| v.unwrap_or(f64::INFINITY)));
    BoxBounds::new(lower, upper).map_err(|e| match e {
        Error::Validation { reason, .. } => Error::validation(field, reason),
        other => other,
    })
}

/// MPC problem for one `mpc` block; `prefix` is its path in the
/// configuration, used in error messages.
pub fn build_problem(
    cfg: &RunConfig,
    mpc: &MpcConfig,
    prefix: &str,
    sys: &DiscreteSystem,
    cycle: Option<&LimitCycle>,
) -> Result<MpcProblem> {
    let field = |name: &str| format!("{prefix}.{name}");
    let q = matrix_from_rows(&field("Q"), &mpc.q)?;
    let r = matrix_from_rows(&field("R"), &mpc.r)?;
    let p = match (&mpc.p, mpc.controller) {
        (TerminalWeightConfig::Matrix(rows), _) => matrix_from_rows(&field("P"), rows)?,
        (TerminalWeightConfig::Auto(_), ControllerKind::LimitCycle) => compute_terminal_p(&sys.a, &q, mpc.epsilon)?.p,
        (TerminalWeightConfig::Auto(_), ControllerKind::Standard) => {
            return Err(Error::validation(
                field("P"),
                "\"auto\" needs the limit_cycle controller; give an explicit output weight",
            ))
        }
    };
    let weights = MpcWeights::new(q, r, p)?;
    let reference = match mpc.controller {
        ControllerKind::Standard => TrackingReference::ConstantOutput(y_ref(cfg, sys)?),
        ControllerKind::LimitCycle => TrackingReference::Cycle(
            cycle
                .cloned()
                .ok_or_else(|| Error::validation("reference.cycle", "required by the limit_cycle controller"))?,
        ),
    };
    let mut prob = MpcProblem::new(sys.clone(), mpc.horizon, weights, reference).map_err(|e| match e {
        Error::Validation { reason, .. } if mpc.horizon == 0 => Error::validation(field("N"), reason),
        other => other,
    })?;
    if let Some(b) = &mpc.state_bounds {
        prob = prob.with_state_bounds(bounds(&field("state_bounds"), b)?)?;
    }
    if let Some(b) = &mpc.output_bounds {
        prob = prob.with_output_bounds(bounds(&field("output_bounds"), b)?)?;
    }
    if let Some(cap) = mpc.max_sequences {
        prob = prob.with_sequence_cap(cap);
    }
    Ok(prob)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretizeSummary {
    #[serde(flatten)]
    pub system: DiscreteConfig,
    pub spectral_radius: f64,
}

/// Writes `discrete_system.json` with `A`, `B`, `C`, `sample_period` and the
/// spectral radius of `A`.
pub fn cmd_discretize(cfg: &RunConfig, ctx: &RunContext) -> Result<DiscretizeSummary> {
    let sys = build_plant(cfg)?;
    let summary = DiscretizeSummary {
        system: DiscreteConfig {
            a: matrix_to_rows(&sys.a),
            b: matrix_to_rows(&sys.b),
            c: matrix_to_rows(&sys.c),
            sample_period: sys.sample_period,
        },
        spectral_radius: sys.spectral_radius()?,
    };
    write_json(ctx, "discrete_system.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCycleSummary {
    #[serde(flatten)]
    pub record: CycleRecord,
    pub cost: f64,
    /// Peak-to-peak of each output over the cycle.
    pub ripple: Vec<f64>,
    /// Operation modes, for two-switch plants.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<u8>>,
    pub certificate_residual: f64,
}

/// Runs the cycle search and writes `limit_cycle.json` (loadable as a
/// `reference.cycle` file) and `limit_cycle.csv`.
pub fn cmd_limit_cycle(cfg: &RunConfig, ctx: &RunContext) -> Result<LimitCycleSummary> {
    let sys = build_plant(cfg)?;
    let (crit, p, cap) = search_criterion(cfg, &sys)?;
    let cycle = optimal_limit_cycle_capped(&sys, &crit, p, cap)?;
    let summary = LimitCycleSummary {
        record: cycle.to_record(),
        cost: cycle_cost(&cycle, &crit, &sys.c)?,
        ripple: cycle_ripple(&cycle, &sys.c),
        modes: (sys.input_bits() == 2).then(|| cycle.modes()).transpose()?,
        certificate_residual: cycle.certificate_residual(),
    };
    write_json(ctx, "limit_cycle.json", &summary)?;
    let mut csv = Vec::new();
    cycle.write_csv(&sys, &mut csv)?;
    write_artifact(ctx, "limit_cycle.csv", &csv)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalSource {
    Computed,
    Given,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerminalSummary {
    pub source: TerminalSource,
    #[serde(rename = "P")]
    pub p: Rows,
    pub valid: bool,
    /// `−λ_max(−P + Q + AᵀPA)`.
    pub margin: f64,
    pub min_eig_p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// Computes a terminal weight for `mpc.Q` when `mpc.P` is `"auto"`, or
/// verifies the given one, and writes `terminal_cost.json`. An invalid
/// given weight is reported, not treated as an error.
pub fn cmd_terminal_cost(cfg: &RunConfig, ctx: &RunContext) -> Result<TerminalSummary> {
    let sys = build_plant(cfg)?;
    let mpc = required(cfg.mpc.as_ref(), "mpc")?;
    let q = matrix_from_rows("mpc.Q", &mpc.q)?;
    let summary = match &mpc.p {
        TerminalWeightConfig::Auto(_) => {
            let terminal = compute_terminal_p(&sys.a, &q, mpc.epsilon)?;
            let check = verify_terminal_p(&sys.a, &q, &terminal.p)?;
            TerminalSummary {
                source: TerminalSource::Computed,
                p: matrix_to_rows(&terminal.p),
                valid: check.valid,
                margin: check.margin,
                min_eig_p: check.min_eig_p,
                epsilon: Some(terminal.epsilon),
            }
        }
        TerminalWeightConfig::Matrix(rows) => {
            let p = matrix_from_rows("mpc.P", rows)?;
            let check = verify_terminal_p(&sys.a, &q, &p)?;
            TerminalSummary {
                source: TerminalSource::Given,
                p: rows.clone(),
                valid: check.valid,
                margin: check.margin,
                min_eig_p: check.min_eig_p,
                epsilon: None,
            }
        }
    };
    write_json(ctx, "terminal_cost.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub trajectory: Trajectory,
    pub report: SteadyStateReport,
    pub cycle: Option<LimitCycle>,
}

impl SimulationOutcome {
    pub fn summary_line(&self) -> String {
        let converged = match self.report.converged_at {
            Some(k) => format!("converged at step {k}"),
            None => "no convergence detected".to_string(),
        };
        format!(
            "ripple {} | {} | mean output {}",
            format_list(&self.report.ripple),
            converged,
            format_list(&self.report.mean_output)
        )
    }
}

fn format_list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.6e}")).collect();
    parts.join(", ")
}

fn run_closed_loop(
    cfg: &RunConfig,
    mpc: &MpcConfig,
    prefix: &str,
    sys: &DiscreteSystem,
    cycle: Option<&LimitCycle>,
    ctx: &RunContext,
) -> Result<(Trajectory, SteadyStateReport)> {
    let prob = build_problem(cfg, mpc, prefix, sys, cycle)?;
    let sim = cfg.sim.clone().unwrap_or_default();
    let x0 = match &sim.x0 {
        Some(values) if values.len() != sys.state_dim() => {
            return Err(Error::dimension("sim.x0", sys.state_dim(), values.len()))
        }
        Some(values) => Vector::from_column_slice(values),
        None => Vector::zeros(sys.state_dim()),
    };
    if sim.convergence_tol.is_nan() || sim.convergence_tol <= 0.0 {
        return Err(Error::validation("sim.convergence_tol", "must be positive"));
    }
    let solver = ctx.solver.unwrap_or(mpc.solver);
    let trajectory = simulate(&prob, &x0, sim.steps, solver)?;
    let tracked = prob.reference.cycle();
    // The default window shrinks to fit short runs; an explicit one must fit.
    let window = sim
        .ripple_window
        .unwrap_or_else(|| tracked.map_or(60, |c| 10 * c.period()).min(trajectory.outputs.len()));
    let opts = ReportOptions {
        convergence_tol: sim.convergence_tol,
        window,
        mode_period_max: sim.mode_period_max,
    };
    let report = steady_state_report(&trajectory, tracked, &opts)?;
    Ok((trajectory, report))
}

/// Runs the closed loop of `mpc` and writes `trajectory.csv` and
/// `report.json`.
pub fn cmd_simulate(cfg: &RunConfig, ctx: &RunContext) -> Result<SimulationOutcome> {
    let sys = build_plant(cfg)?;
    let mpc = required(cfg.mpc.as_ref(), "mpc")?;
    let cycle = match mpc.controller {
        ControllerKind::LimitCycle => build_cycle(cfg, &sys, ctx)?,
        ControllerKind::Standard => None,
    };
    let (trajectory, report) = run_closed_loop(cfg, mpc, "mpc", &sys, cycle.as_ref(), ctx)?;
    let mut csv = Vec::new();
    trajectory.write_csv(&mut csv)?;
    write_artifact(ctx, "trajectory.csv", &csv)?;
    write_json(ctx, "report.json", &report)?;
    Ok(SimulationOutcome {
        trajectory,
        report,
        cycle,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub name: String,
    pub controller: ControllerKind,
    #[serde(rename = "N")]
    pub horizon: usize,
    pub ripple: Vec<f64>,
    pub converged_at: Option<usize>,
    pub mean_output: Vec<f64>,
    pub mean_nodes_explored: f64,
    /// Informational only.
    pub mean_solve_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareTable {
    pub rows: Vec<CompareRow>,
}

impl CompareTable {
    fn to_csv(&self) -> Result<Vec<u8>> {
        let q = self.rows.first().map_or(0, |r| r.ripple.len());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["name".to_string(), "controller".into(), "N".into()];
        header.extend((1..=q).map(|j| format!("ripple_y{j}")));
        header.push("converged_at".into());
        header.extend((1..=q).map(|j| format!("mean_y{j}")));
        header.extend(["mean_nodes_explored".into(), "mean_solve_seconds".into()]);
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.name.clone(), controller_name(row.controller).into(), row.horizon.to_string()];
            rec.extend(row.ripple.iter().map(|v| v.to_string()));
            rec.push(row.converged_at.map(|k| k.to_string()).unwrap_or_default());
            rec.extend(row.mean_output.iter().map(|v| v.to_string()));
            rec.push(row.mean_nodes_explored.to_string());
            rec.push(row.mean_solve_seconds.to_string());
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| Error::Io {
            path: "compare CSV".into(),
            source: e.into_error(),
        })
    }
}

fn controller_name(kind: ControllerKind) -> &'static str {
    match kind {
        ControllerKind::Standard => "standard",
        ControllerKind::LimitCycle => "limit_cycle",
    }
}

impl fmt::Display for CompareTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} {:<12} {:>3} {:>14} {:>10} {:>12} {:>12}",
            "variant", "controller", "N", "ripple y1", "converged", "mean nodes", "solve [us]"
        )?;
        for row in &self.rows {
            writeln!(
                f,
                "{:<16} {:<12} {:>3} {:>14.6e} {:>10} {:>12.1} {:>12.2}",
                row.name,
                controller_name(row.controller),
                row.horizon,
                row.ripple.first().copied().unwrap_or(f64::NAN),
                row.converged_at.map_or_else(|| "-".to_string(), |k| k.to_string()),
                row.mean_nodes_explored,
                row.mean_solve_seconds * 1e6
            )?;
        }
        Ok(())
    }
}

fn check_variants(cfg: &RunConfig) -> Result<()> {
    if cfg.variants.len() < 2 {
        return Err(Error::validation(
            "variants",
            format!("compare needs at least two variants, got {}; use simulate for one", cfg.variants.len()),
        ));
    }
    for (i, v) in cfg.variants.iter().enumerate() {
        let field = format!("variants[{i}].name");
        if v.name.is_empty() || !v.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(Error::validation(field, "use letters, digits, '-' or '_'"));
        }
        if cfg.variants[..i].iter().any(|w| w.name == v.name) {
            return Err(Error::validation(field, format!("duplicate variant name `{}`", v.name)));
        }
    }
    Ok(())
}

/// Simulates every entry of `variants` (in parallel) and writes
/// `compare.csv` plus one trajectory and report per variant. Rows keep the
/// configuration order.
pub fn cmd_compare(cfg: &RunConfig, ctx: &RunContext) -> Result<CompareTable> {
    check_variants(cfg)?;
    let sys = build_plant(cfg)?;
    let needs_cycle = cfg.variants.iter().any(|v| v.mpc.controller == ControllerKind::LimitCycle);
    let cycle = if needs_cycle { build_cycle(cfg, &sys, ctx)? } else { None };
    let runs: Vec<Result<(Trajectory, SteadyStateReport)>> = cfg
        .variants
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let cycle = match v.mpc.controller {
                ControllerKind::LimitCycle => cycle.as_ref(),
                ControllerKind::Standard => None,
            };
            run_closed_loop(cfg, &v.mpc, &format!("variants[{i}].mpc"), &sys, cycle, ctx)
        })
        .collect();
    let mut rows = Vec::with_capacity(runs.len());
    for (variant, run) in cfg.variants.iter().zip(runs) {
        let (trajectory, report) = run?;
        let mut csv = Vec::new();
        trajectory.write_csv(&mut csv)?;
        write_artifact(ctx, &format!("trajectory_{}.csv", variant.name), &csv)?;
        write_json(ctx, &format!("report_{}.json", variant.name), &report)?;
        rows.push(CompareRow {
            name: variant.name.clone(),
            controller: variant.mpc.controller,
            horizon: variant.mpc.horizon,
            ripple: report.ripple,
            converged_at: report.converged_at,
            mean_output: report.mean_output,
            mean_nodes_explored: report.mean_nodes_explored,
            mean_solve_seconds: report.mean_solve_seconds,
        });
    }
    let table = CompareTable { rows };
    write_artifact(ctx, "compare.csv", &table.to_csv()?)?;
    Ok(table)
}
