use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "otinfer",
    version,
    about = "Forward transport solves, synthetic observations, MCMC cost inference, and chain diagnostics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic noisy observation from a known latent state.
    Simulate(SimulateArgs),
    /// Run the Metropolis-within-Gibbs chain against an observation.
    Infer(InferArgs),
    /// Turn a finished chain into plot-ready CSV/JSON reports.
    Diagnose(DiagnoseArgs),
    /// Normalize an origin-destination flow CSV into an observation.
    Ingest(IngestArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum CostKindArg {
    Toeplitz,
    General,
    Graph,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Exact,
    Sinkhorn,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SelectionArg {
    Receiving,
    Sending,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Cost parameterization of the forward model.
    #[arg(long, value_enum)]
    pub cost: CostKindArg,
    /// Problem dimension (required for toeplitz and general costs).
    #[arg(long)]
    pub n: Option<usize>,
    /// Edge-list file defining the graph (required for graph costs).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Noise standard deviation applied to the normalized plan.
    #[arg(long, default_value_t = 0.04)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SolverArg::Exact)]
    pub solver: SolverArg,
    /// Entropic regularization strength for the sinkhorn solver.
    #[arg(long, default_value_t = 0.04)]
    pub epsilon: f64,
    /// Diagonal staying penalty written into the raw cost.
    #[arg(long, default_value_t = 10.0)]
    pub c_bar: f64,
    /// Load the truth state from a JSON file instead of drawing it.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct InferArgs {
    /// Observation file produced by `simulate` or `ingest`.
    #[arg(long)]
    pub observation: PathBuf,
    /// Flat `key = value` config file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Observation noise level entering the misfit; defaults to the level
    /// recorded in a synthetic observation.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub delta_u: Option<f64>,
    #[arg(long)]
    pub delta_v: Option<f64>,
    #[arg(long)]
    pub delta_theta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub thinning: Option<usize>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Number of independent chains (seeds seed, seed+1, ...), run
    /// concurrently.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Cost parameterization, for observations that do not carry one
    /// (ingested data).
    #[arg(long, value_enum)]
    pub cost: Option<CostKindArg>,
    /// Graph file, when `--cost graph` is supplied here.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub c_bar: Option<f64>,
    /// Start the chain from this latent state (JSON) instead of a random
    /// draw.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct DiagnoseArgs {
    /// Chain file written by `infer`.
    #[arg(long)]
    pub chain: PathBuf,
    /// Comma-separated component labels (u0, v3, theta2, ...); defaults to
    /// the first three components of each block.
    #[arg(long)]
    pub components: Option<String>,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Truth state (JSON) for a coverage report against the central 95%
    /// posterior intervals.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct IngestArgs {
    /// Origin-destination flow CSV.
    #[arg(long)]
    pub csv: PathBuf,
    /// Which reported table to use.
    #[arg(long, value_enum, default_value_t = SelectionArg::Receiving)]
    pub selection: SelectionArg,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct OutArgs {
    /// Output directory; falls back to $OTINFER_OUT_DIR, then the working
    /// directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Stem for every file this command writes.
    #[arg(long)]
    pub name: Option<String>,
}

impl OutArgs {
    pub fn resolve_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os("OTINFER_OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}
