//! JSON run configuration and the five workflows behind the `fcs-mpc`
//! binary: discretise, limit-cycle search, terminal-weight synthesis,
//! closed-loop simulation and multi-variant comparison.
//!
//! Matrices are row-major nested arrays. A complete configuration looks like
//!
//! ```json
//! {
//!   "plant": { "amplifier": { "V_bus": 360, "L": 44e-6, "C": 0.4e-6,
//!                             "R": 62.2e-6, "L_m": 20e-3, "R_m": 10 } },
//!   "sampling": { "f_s": 400000 },
//!   "reference": { "y_ref": [6.0], "cycle": "search" },
//!   "cycle_search": { "p": 6, "Gamma": [[1.0]], "norm": "two_norm" },
//!   "mpc": { "controller": "limit_cycle", "N": 4, "Q": [[...]], "R": [[...]],
//!            "P": "auto", "solver": "bnb" },
//!   "sim": { "steps": 2000, "convergence_tol": 1e-3 },
//!   "output": { "dir": "out" }
//! }
//! ```
//!
//! `plant` may instead be `{"continuous": {"A", "B", "C"}}` (discretised at
//! `sampling.f_s`) or `{"discrete": {"A", "B", "C", "sample_period"}}`.
//! `reference.cycle` is `"search"`, `{"inputs": [[1,0], ...]}` or
//! `{"file": "cycle.json"}` (relative to the configuration file).
//! `variants` lists named `mpc` blocks for [`cmd_compare`].

mod commands;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_cycle::CycleNorm;
use crate::model::AmplifierParams;
use crate::mpc::SolverChoice;

pub use commands::{
    build_cycle, build_plant, build_problem, cmd_compare, cmd_discretize, cmd_limit_cycle, cmd_simulate,
    cmd_terminal_cost, CompareRow, CompareTable, DiscretizeSummary, LimitCycleSummary, SimulationOutcome,
    TerminalSummary,
};

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle_search: Option<CycleSearchConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mpc: Option<MpcConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<VariantConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantConfig {
    Amplifier(AmplifierParams),
    Continuous(ContinuousConfig),
    Discrete(DiscreteConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousConfig {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "C")]
    pub c: Rows,
}

/// Also the output format of [`cmd_discretize`], so its result can be fed
/// back as a plant (extra fields such as `spectral_radius` are ignored).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteConfig {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "C")]
    pub c: Rows,
    pub sample_period: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// Sampling frequency in hertz.
    pub f_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_ref: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle: Option<CycleSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleSource {
    /// Run the cycle search configured in `cycle_search`.
    Search,
    /// Cycle generated by these inputs, phase 0 first.
    Inputs(Vec<Vec<u8>>),
    /// A cycle JSON written by [`cmd_limit_cycle`].
    File(PathBuf),
}

fn default_norm() -> CycleNorm {
    CycleNorm::TwoNorm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleSearchConfig {
    /// Period of the cycles to enumerate.
    pub p: usize,
    /// Output weight; identity when omitted.
    #[serde(rename = "Gamma", default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Rows>,
    #[serde(default = "default_norm")]
    pub norm: CycleNorm,
    /// Cap on the number of candidates, `(2^m)^p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Constant output reference, terminal weight on the output.
    Standard,
    /// Cycle reference, terminal weight on the state.
    LimitCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoKeyword {
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TerminalWeightConfig {
    /// Solve the Lyapunov equation for a weight with a decrease certificate.
    Auto(AutoKeyword),
    Matrix(Rows),
}

/// Per-entry box; `null` leaves an entry unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcConfig {
    pub controller: ControllerKind,
    #[serde(rename = "N")]
    pub horizon: usize,
    #[serde(rename = "Q")]
    pub q: Rows,
    #[serde(rename = "R")]
    pub r: Rows,
    #[serde(rename = "P")]
    pub p: TerminalWeightConfig,
    /// Slack for `"auto"` terminal weights; `1e−6·trace(Q)/n` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub solver: SolverChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_bounds: Option<BoundsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_bounds: Option<BoundsConfig>,
    /// Cap on `(2^m)^N` for the exhaustive solver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sequences: Option<u64>,
}

fn default_steps() -> usize {
    2000
}

fn default_convergence_tol() -> f64 {
    1e-3
}

fn default_mode_period_max() -> usize {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Initial state; zero when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_convergence_tol")]
    pub convergence_tol: f64,
    /// Samples used for ripple and mean output; `10·p` for cycle
    /// references and 60 otherwise when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ripple_window: Option<usize>,
    #[serde(default = "default_mode_period_max")]
    pub mode_period_max: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            x0: None,
            steps: default_steps(),
            convergence_tol: default_convergence_tol(),
            ripple_window: None,
            mode_period_max: default_mode_period_max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Artifact directory, relative to the configuration file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantConfig {
    pub name: String,
    pub mpc: MpcConfig,
}

/// Everything a command needs besides the configuration itself.
#[derive(Debug, Clone, Default)]
pub struct RunContext {
    /// Directory relative paths in the configuration are resolved against.
    pub base_dir: PathBuf,
    /// Where artifacts go; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    /// Overrides every `mpc.solver` in the configuration.
    pub solver: Option<SolverChoice>,
}

impl RunContext {
    /// Context for a configuration file: relative paths resolve next to it
    /// and artifacts go to `out`, else `output.dir`, else nowhere.
    pub fn for_config(config_path: &Path, config: &RunConfig, out: Option<PathBuf>) -> Self {
        let base_dir = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let out_dir = out.or_else(|| {
            config
                .output
                .as_ref()
                .and_then(|o| o.dir.as_ref())
                .map(|d| base_dir.join(d))
        });
        Self {
            base_dir,
            out_dir,
            solver: None,
        }
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }
}

/// Parses a configuration; errors carry the JSON path of the offending
/// field, e.g. `plant.amplifier.V_bus`.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        let message = inner.to_string();
        let field = match missing_field(&message) {
            Some(name) if path == "." => name.to_string(),
            Some(name) => format!("{path}.{name}"),
            None => path,
        };
        Error::validation(field, message)
    })
}

fn missing_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

pub fn config_to_json(config: &RunConfig) -> Result<String> {
    Ok(serde_json::to_string_pretty(config)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"{
        "plant": {"amplifier": {"V_bus": 360, "L": 44e-6, "C": 0.4e-6, "R": 62.2e-6, "L_m": 20e-3, "R_m": 10}},
        "sampling": {"f_s": 400000},
        "reference": {"y_ref": [6.0], "cycle": {"inputs": [[1,0],[0,1],[1,0],[0,0],[0,0],[0,0]]}},
        "cycle_search": {"p": 6, "Gamma": [[1.0]]},
        "mpc": {"controller": "limit_cycle", "N": 4, "Q": [[1,0],[0,1]], "R": [[0.05,0],[0,0.05]], "P": "auto",
                "state_bounds": {"lower": [null, -1.0], "upper": [2.5, null]}},
        "sim": {"steps": 10},
        "variants": [{"name": "a", "mpc": {"controller": "standard", "N": 3, "Q": [[1]], "R": [[1e-4,0],[0,1e-4]], "P": [[1]], "solver": "exhaustive"}}]
    }"#;

    #[test]
    fn round_trip_is_identity() {
        let cfg = parse_config(FULL).unwrap();
        let text = config_to_json(&cfg).unwrap();
        let again = parse_config(&text).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(text, config_to_json(&again).unwrap());
    }

    #[test]
    fn defaults_are_filled_in() {
        let cfg = parse_config(FULL).unwrap();
        let search = cfg.cycle_search.unwrap();
        assert_eq!(search.norm, CycleNorm::TwoNorm);
        let sim = cfg.sim.unwrap();
        assert_eq!(sim.steps, 10);
        assert_eq!(sim.convergence_tol, 1e-3);
        let mpc = cfg.mpc.unwrap();
        assert_eq!(mpc.solver, SolverChoice::BranchAndBound);
        assert_eq!(mpc.p, TerminalWeightConfig::Auto(AutoKeyword::Auto));
        assert_eq!(cfg.variants[0].mpc.p, TerminalWeightConfig::Matrix(vec![vec![1.0]]));
    }

    #[test]
    fn missing_field_is_named_by_path() {
        let text = r#"{"plant": {"amplifier": {"L": 44e-6, "C": 0.4e-6, "R": 0, "L_m": 0.02, "R_m": 10}}}"#;
        match parse_config(text).unwrap_err() {
            Error::Validation { field, .. } => assert_eq!(field, "plant.amplifier.V_bus"),
            other => panic!("unexpected {other:?}"),
        }
        match parse_config("{}").unwrap_err() {
            Error::Validation { field, .. } => assert_eq!(field, "plant"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_types_and_unknown_fields_are_named() {
        let text = r#"{"plant": {"discrete": {"A": [[0.5]], "B": [[1]], "C": [[1]], "sample_period": "x"}}}"#;
        match parse_config(text).unwrap_err() {
            Error::Validation { field, .. } => assert_eq!(field, "plant.discrete.sample_period"),
            other => panic!("unexpected {other:?}"),
        }
        let text = r#"{"plant": {"discrete": {"A": [[0.5]], "B": [[1]], "C": [[1]], "sample_period": 1}}, "simm": {}}"#;
        assert!(matches!(parse_config(text).unwrap_err(), Error::Validation { .. }));
    }

    #[test]
    fn two_plant_variants_are_rejected() {
        let text = r#"{"plant": {"discrete": {"A": [[0.5]], "B": [[1]], "C": [[1]], "sample_period": 1},
                                 "continuous": {"A": [[0.5]], "B": [[1]], "C": [[1]]}}}"#;
        assert!(parse_config(text).is_err());
    }
}
