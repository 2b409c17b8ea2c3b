//! Error type shared by every module in this crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimensions of two operands do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A value lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A latent block has no mass, so normalization onto the simplex is undefined.
    #[error("degenerate latent: {0}")]
    DegenerateLatent(String),

    /// Structural problem with a directed graph (self-loop, duplicate edge, bad index).
    #[error("invalid graph: {0}")]
    Graph(String),

    /// No directed path between a vertex pair; shortest-path costs must be finite.
    #[error("no directed path from vertex {from} to vertex {to}")]
    UnreachablePair { from: usize, to: usize },

    /// Iterative solver exhausted its budget before meeting the tolerance.
    #[error("solver did not converge within {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    /// Additive noise drove every entry of a synthetic observation to zero.
    #[error("observation degenerated: all entries clipped to zero")]
    DegenerateObservation,

    /// Malformed or inconsistent input data file.
    #[error("ingest error: {0}")]
    Ingest(String),

    /// Chain file written by an incompatible version of this crate.
    #[error("chain file version {found} not supported (expected {expected})")]
    Version { found: u32, expected: u32 },

    /// Chain file is truncated or internally inconsistent.
    #[error("corrupt chain file: {0}")]
    Corrupt(String),

    /// Posterior summaries need at least two retained samples.
    #[error("chain too short for summaries: {0} samples (need at least 2)")]
    EmptyChain(usize),

    /// The chain could not find a valid starting state.
    #[error("chain initialization failed after {attempts} attempts: {last}")]
    ChainInit { attempts: usize, last: String },

    /// Invalid solver or chain configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
