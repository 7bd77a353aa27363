use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fcs_mpc::cli::{self, RunContext};
use fcs_mpc::mpc::SolverChoice;

#[derive(Parser)]
#[command(name = "fcs-mpc", version, about = "Finite-control-set MPC with limit-cycle tracking")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discretise the plant and write its matrices.
    Discretize(Common),
    /// Search the optimal limit cycle.
    LimitCycle(Common),
    /// Compute or verify the terminal weight.
    TerminalCost(Common),
    /// Run the closed loop and report steady-state metrics.
    Simulate(Common),
    /// Run every variant and tabulate the results.
    Compare(Common),
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory; defaults to `output.dir` of the configuration,
    /// else `./out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the sequence solver of every controller.
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Reserved for synthetic runs; accepted and ignored.
    #[arg(long)]
    seed: Option<u64>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Exhaustive,
    Bnb,
}

impl From<SolverArg> for SolverChoice {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Exhaustive => SolverChoice::Exhaustive,
            SolverArg::Bnb => SolverChoice::BranchAndBound,
        }
    }
}

fn run(command: Command) -> fcs_mpc::Result<()> {
    let (Command::Discretize(common)
    | Command::LimitCycle(common)
    | Command::TerminalCost(common)
    | Command::Simulate(common)
    | Command::Compare(common)) = &command;
    let config = cli::load_config(&common.config)?;
    let mut ctx = RunContext::for_config(&common.config, &config, common.out.clone());
    ctx.out_dir.get_or_insert_with(|| PathBuf::from("out"));
    ctx.solver = common.solver.map(Into::into);
    let say = |line: String| {
        if !common.quiet {
            println!("{line}");
        }
    };
    match command {
        Command::Discretize(_) => {
            let s = cli::cmd_discretize(&config, &ctx)?;
            say(format!("spectral radius {:.16}", s.spectral_radius));
        }
        Command::LimitCycle(_) => {
            let s = cli::cmd_limit_cycle(&config, &ctx)?;
            let modes = s.modes.map(|m| format!(" | modes {m:?}")).unwrap_or_default();
            say(format!("cycle #{} cost {:.6e} | ripple {:?}{modes}", s.record.index, s.cost, s.ripple));
        }
        Command::TerminalCost(_) => {
            let s = cli::cmd_terminal_cost(&config, &ctx)?;
            say(format!("valid {} | margin {:.6e} | min eig P {:.6e}", s.valid, s.margin, s.min_eig_p));
        }
        Command::Simulate(_) => {
            let s = cli::cmd_simulate(&config, &ctx)?;
            say(s.summary_line());
        }
        Command::Compare(_) => {
            let table = cli::cmd_compare(&config, &ctx)?;
            say(table.to_string());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
