mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dagmm::Error;

/// Mixed-membership block model for citation DAGs with an inferred
/// topological order.
#[derive(Debug, Parser)]
#[command(name = "dagmm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Break mutual citations and check that the result is acyclic.
    Clean(CleanArgs),
    /// Size, density, degree summaries and one topological order.
    Stats(StatsArgs),
    /// Run the sampler and write a run directory.
    Fit(FitArgs),
    /// Posterior summaries from a finished run directory.
    Summarize(SummarizeArgs),
    /// Simulate a citation DAG with known parameters.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct CleanArgs {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    /// Seed for breaking ties between articles of unknown relative age.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "DAGMM_OUT", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    /// File with one node id per line; statistics use the induced subgraph.
    #[arg(long)]
    pub subgraph: Option<PathBuf>,
    #[arg(long, env = "DAGMM_OUT", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    pub edges: PathBuf,
    /// Node table; nodes without edges are only included when it is given.
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    /// Number of groups.
    #[arg(long = "K", short = 'K')]
    pub k: usize,
    /// Retained samples.
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 20_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Proposal standard deviation for the concentration parameter.
    #[arg(long, default_value_t = 0.1)]
    pub s_alpha: f64,
    /// Order swap proposals per sweep (default: one per node).
    #[arg(long)]
    pub swaps: Option<usize>,
    /// Write every retained state to snapshots.jsonl.
    #[arg(long)]
    pub snapshots: bool,
    /// Include interaction memberships in the snapshots.
    #[arg(long, requires = "snapshots")]
    pub snapshots_z: bool,
    /// Independent chains with seeds seed, seed+1, ...; each gets a subdirectory.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long, env = "DAGMM_OUT", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SummarizeArgs {
    pub run: PathBuf,
    pub nodes: PathBuf,
    /// Within-group citation probability below which a group is miscellaneous.
    #[arg(long, default_value_t = dagmm::posterior::DEFAULT_MISC_THRESHOLD)]
    pub threshold: f64,
    /// Add the full position distribution of every node to positions.csv.
    #[arg(long)]
    pub histogram: bool,
    /// Output directory (default: the run directory).
    #[arg(long, env = "DAGMM_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long = "K", short = 'K')]
    pub k: usize,
    #[arg(long, default_value_t = 0.8)]
    pub c_diag: f64,
    #[arg(long, default_value_t = 0.05)]
    pub c_off: f64,
    /// Every node belongs entirely to group `position mod K`.
    #[arg(long, conflicts_with = "purity")]
    pub hard_membership: bool,
    /// Weight of the dominant group `position mod K`, the rest spread evenly.
    #[arg(long)]
    pub purity: Option<f64>,
    /// Symmetric Dirichlet concentration, used when memberships are not fixed.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Give the node at 1-based position p the year `base + n - p`.
    #[arg(long, value_name = "BASE_YEAR")]
    pub years: Option<i32>,
    /// Include the true interaction memberships in truth.json.
    #[arg(long)]
    pub with_z: bool,
    #[arg(long, env = "DAGMM_OUT", default_value = ".")]
    pub out: PathBuf,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::CycleFound(_) | Error::TooFewNodes(_) => 2,
        Error::InvalidConfig(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Clean(a) => commands::clean(a),
        Command::Stats(a) => commands::stats(a),
        Command::Fit(a) => commands::fit(a),
        Command::Summarize(a) => commands::summarize(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
