use std::path::Path;

use otinfer_core::{
    CostKind, CostStructure, DirectedGraph, LatentState, PenaltySettings, SinkhornSettings,
    SolverChoice,
};

use crate::args::{CostKindArg, SolverArg};
use crate::error::CliError;

pub mod diagnose;
pub mod infer;
pub mod ingest;
pub mod simulate;

pub fn load_latent_state(path: &Path) -> Result<LatentState, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::data(format!("cannot open state file {}: {e}", path.display())))?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| CliError::data(format!("cannot parse state file {}: {e}", path.display())))
}

pub fn save_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", path.display())))?;
    serde_json::to_writer_pretty(file, value)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

pub fn build_structure(
    cost: CostKindArg,
    n: Option<usize>,
    graph: Option<&Path>,
    c_bar: f64,
) -> Result<CostStructure, CliError> {
    let penalty = PenaltySettings::new(c_bar)?;
    let kind = match cost {
        CostKindArg::Toeplitz | CostKindArg::General => {
            let n = n.ok_or_else(|| {
                CliError::usage("--n is required for toeplitz and general costs")
            })?;
            if n < 2 {
                return Err(CliError::usage("--n must be at least 2"));
            }
            if cost == CostKindArg::Toeplitz {
                CostKind::Toeplitz { n }
            } else {
                CostKind::General { n }
            }
        }
        CostKindArg::Graph => {
            let path = graph
                .ok_or_else(|| CliError::usage("--graph is required when --cost graph is set"))?;
            let graph = DirectedGraph::from_file(path)?;
            CostKind::Graph { graph }
        }
    };
    Ok(CostStructure::new(kind, penalty))
}

pub fn build_solver(solver: SolverArg, epsilon: f64) -> SolverChoice {
    match solver {
        SolverArg::Exact => SolverChoice::Exact,
        SolverArg::Sinkhorn => SolverChoice::Sinkhorn(SinkhornSettings::new(epsilon)),
    }
}
