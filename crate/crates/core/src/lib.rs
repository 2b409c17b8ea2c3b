//! Forward and inverse solvers for discrete optimal transport.
//!
//! The forward side solves the transportation linear program exactly or via
//! entropically regularized scaling, with cost matrices built from banded,
//! general, or graph-shortest-path parameterizations. The inverse side
//! treats a noisy transport plan as data and samples the posterior over the
//! latent marginals and cost parameters with a random-walk
//! Metropolis-within-Gibbs chain.

pub mod cost;
pub mod data;
pub mod error;
pub mod graph;
pub mod mcmc;
pub mod simplex;
pub mod transport;

pub use cost::{
    build_cost, classify_determinedness, CostKind, CostParams, CostStructure, Determinedness,
    PenaltySettings,
};
pub use data::{
    generate_synthetic, ingest_migration_csv, load_chain, persist_chain, MigrationTable,
    ObservationRecord, Provenance, Selection,
};
pub use error::{Error, Result};
pub use graph::DirectedGraph;
pub use mcmc::{
    forward_map, misfit, posterior_summary, run_chain, ChainConfig, ChainOutput, InverseProblem,
    LatentState,
};
pub use simplex::{
    entropy, frobenius_inner, kl_divergence, normalize_matrix, normalize_vector, Coupling,
    PositiveMatrix, PositiveVector, ProbMatrix, ProbVector,
};
pub use transport::{
    gibbs_kernel, solve_exact, solve_sinkhorn, transport_objective, SinkhornSettings, SolveReport,
    SolverChoice, TransportProblem,
};
