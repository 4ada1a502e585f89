//! Batch front end for the power flow solver library.
//!
//! Exit codes: 0 = success/complete, 1 = usage error, 2 = degenerate
//! parameters, 3 = incomplete solution set, 4 = runtime failure.

mod commands;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{ArgGroup, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_INCOMPLETE: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Parser)]
#[command(
    name = "pfdist",
    version,
    about = "Count and track the solutions of lossless power flow equations",
    propagate_version = true
)]
pub struct Cli {
    /// Base RNG seed; one is drawn from entropy and printed when absent
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for batch phases; 0 uses all available cores
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    /// Directory for output artifacts (default: PFDIST_OUT_DIR, then .)
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Subcommand)]
pub enum Cmd {
    /// Solve one susceptance vector and report real/complex counts
    Solve(SolveArgs),
    /// Monte Carlo distribution of real-solution counts over random parameters
    Distribution(DistributionArgs),
    /// Map real-solution counts over a sphere slice of parameter space
    Regions(RegionsArgs),
    /// Expected real roots of random polynomials, with optional comparisons
    Kac(KacArgs),
    /// Closed-form solution count bounds for a topology
    Bounds(BoundsArgs),
    /// Check the structural guarantees: all-real parameters, degenerate
    /// families, tree triviality
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupModeArg {
    /// Full symmetry group of the topology and injections
    Auto,
    /// Only the y-negation involution
    YNegation,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TheoremArg {
    /// Parameters that make every solution real on cycles
    MaxReal,
    /// Positive-dimensional solution families at uniform parameters
    InfiniteFamily,
    /// Trees admit only the trivial real solutions
    TreeTrivial,
}

#[derive(clap::Args)]
#[command(group(ArgGroup::new("bsrc").required(true).args(["b", "b_file", "random"])))]
pub struct SolveArgs {
    /// Topology: cycle:N, complete:N, or tree:N:0-1,1-2,... (or tree:N:@file)
    #[arg(long)]
    pub topology: String,

    /// Inline susceptances in canonical edge order, comma separated
    #[arg(long)]
    pub b: Option<String>,

    /// File of susceptances, whitespace or comma separated
    #[arg(long)]
    pub b_file: Option<PathBuf>,

    /// Draw the susceptances uniformly from the unit sphere
    #[arg(long)]
    pub random: bool,

    /// Net injections at nodes 1..n-1, comma separated; zero when absent
    #[arg(long)]
    pub injections: Option<String>,

    /// Start set JSON to load, or to write next to the run if missing
    #[arg(long)]
    pub start_set: Option<PathBuf>,

    /// Symmetry action used for orbit bookkeeping
    #[arg(long, value_enum, default_value_t = GroupModeArg::Auto)]
    pub group_mode: GroupModeArg,
}

#[derive(clap::Args)]
pub struct DistributionArgs {
    /// Topology: cycle:N, complete:N, or tree:N:0-1,1-2,... (or tree:N:@file)
    #[arg(long)]
    pub topology: String,

    /// Number of Monte Carlo trials
    #[arg(long, default_value_t = 20_000)]
    pub trials: u64,

    /// Confidence parameter for the distribution error bound
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,

    /// Trials dispatched per worker batch
    #[arg(long, default_value_t = 64)]
    pub chunk: usize,

    /// Abort when the failed-trial fraction exceeds this
    #[arg(long, default_value_t = 0.05)]
    pub max_failure_rate: f64,

    /// Continue a previous run from its trial log
    #[arg(long)]
    pub resume: Option<PathBuf>,

    /// Start set JSON to load, or to write next to the run if missing
    #[arg(long)]
    pub start_set: Option<PathBuf>,

    /// Symmetry action used for orbit bookkeeping
    #[arg(long, value_enum, default_value_t = GroupModeArg::Auto)]
    pub group_mode: GroupModeArg,
}

#[derive(clap::Args)]
pub struct RegionsArgs {
    /// Topology: cycle:N, complete:N, or tree:N:0-1,1-2,... (or tree:N:@file)
    #[arg(long)]
    pub topology: String,

    /// The three canonical edge indices swept over the sphere
    #[arg(long, default_value = "0,1,2")]
    pub free: String,

    /// Pinned susceptance for one edge, as EDGE=VALUE; repeatable
    #[arg(long, value_name = "EDGE=VALUE")]
    pub fixed: Vec<String>,

    /// Grid cells in longitude
    #[arg(long, default_value_t = 400)]
    pub width: usize,

    /// Grid cells in latitude
    #[arg(long, default_value_t = 200)]
    pub height: usize,

    /// Start set JSON to load, or to write next to the run if missing
    #[arg(long)]
    pub start_set: Option<PathBuf>,

    /// Symmetry action used for orbit bookkeeping
    #[arg(long, value_enum, default_value_t = GroupModeArg::Auto)]
    pub group_mode: GroupModeArg,
}

#[derive(clap::Args)]
pub struct KacArgs {
    /// Polynomial degree for the expected real-root count
    #[arg(long)]
    pub degree: Option<u32>,

    /// Also run this many Monte Carlo trials at --degree and compare
    #[arg(long)]
    pub mc_trials: Option<u64>,

    /// Distribution summary JSONs to tabulate against the closed form
    #[arg(long, value_name = "SUMMARY_JSON")]
    pub compare: Vec<PathBuf>,
}

#[derive(clap::Args)]
pub struct BoundsArgs {
    /// Topology: cycle:N, complete:N, or tree:N:0-1,1-2,... (or tree:N:@file)
    #[arg(long)]
    pub topology: String,
}

#[derive(clap::Args)]
pub struct VerifyArgs {
    /// Which structural guarantee to check
    #[arg(long, value_enum)]
    pub theorem: TheoremArg,

    /// Topology: cycle:N, complete:N, or tree:N:0-1,1-2,... (or tree:N:@file)
    #[arg(long)]
    pub topology: String,

    /// Random susceptance draws for the tree check
    #[arg(long, default_value_t = 100)]
    pub trials: usize,

    /// Angle-grid resolution per node for the tree check
    #[arg(long, default_value_t = 8)]
    pub grid: usize,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    EXIT_OK
                }
                _ => {
                    eprint!("{err}");
                    EXIT_USAGE
                }
            };
            std::process::exit(code);
        }
    };
    std::process::exit(commands::run(cli));
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn every_flag_is_documented() {
        let cmd = Cli::command();
        for sub in cmd.get_subcommands() {
            assert!(sub.get_about().is_some(), "subcommand {} has no about", sub.get_name());
            for arg in sub.get_arguments() {
                assert!(
                    arg.get_help().is_some(),
                    "{} --{} has no help text",
                    sub.get_name(),
                    arg.get_id()
                );
            }
        }
        assert!(cmd.get_subcommands().count() == 6);
    }

    #[test]
    fn b_sources_are_mutually_exclusive() {
        assert!(Cli::try_parse_from([
            "pfdist", "solve", "--topology", "cycle:3", "--b", "1,1,1", "--random",
        ])
        .is_err());
        assert!(Cli::try_parse_from(["pfdist", "solve", "--topology", "cycle:3"]).is_err());
        assert!(Cli::try_parse_from([
            "pfdist", "solve", "--topology", "cycle:3", "--b", "1,1,1",
        ])
        .is_ok());
    }
}
