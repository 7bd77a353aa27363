//! Drives the JSON workflows programmatically: loads a bundled
//! configuration, runs the cycle search, terminal-weight check and closed
//! loop, and writes the artifacts to a directory.
//!
//! ```text
//! cargo run --example run_config [config.json] [out_dir]
//! ```

use std::path::{Path, PathBuf};

use fcs_mpc::cli::{self, RunContext};

pub fn run_example(config_path: &Path, out_dir: &Path) -> fcs_mpc::Result<cli::SimulationOutcome> {
    let config = cli::load_config(config_path)?;
    let ctx = RunContext::for_config(config_path, &config, Some(out_dir.to_path_buf()));
    let system = cli::cmd_discretize(&config, &ctx)?;
    println!("spectral radius {:.10}", system.spectral_radius);
    let terminal = cli::cmd_terminal_cost(&config, &ctx)?;
    println!("terminal weight valid: {} (margin {:.3e})", terminal.valid, terminal.margin);
    let outcome = cli::cmd_simulate(&config, &ctx)?;
    println!("{}", outcome.summary_line());
    println!("artifacts in {}", out_dir.display());
    Ok(outcome)
}

#[allow(dead_code)]
fn main() -> fcs_mpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().map(PathBuf::from).unwrap_or_else(|| {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/limit_cycle_mpc_auto_p.json")
    });
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"));
    run_example(&config, &out).map(|_| ())
}
