use std::path::PathBuf;

use otinfer_core::data::{persist_chain, ObservationRecord, Provenance};
use otinfer_core::mcmc::{run_chain, BlockAccept, ChainConfig, ChainOutput};
use otinfer_core::CostStructure;

use crate::args::{InferArgs, SolverArg};
use crate::config_file::ConfigFile;
use crate::error::CliError;
use crate::manifest::ManifestBuilder;

use super::{build_solver, build_structure, load_latent_state};

pub fn run(args: InferArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("infer");
    manifest.input(&args.observation)?;
    let record = ObservationRecord::load(&args.observation)?;

    let file = match &args.config {
        Some(path) => {
            manifest.input(path)?;
            ConfigFile::load(path)?
        }
        None => ConfigFile::empty(),
    };

    let structure = resolve_structure(&args, &file, &record, &mut manifest)?;
    let config = resolve_config(&args, &file, &record, &mut manifest)?;

    let dir = args.out.resolve_dir();
    std::fs::create_dir_all(&dir)?;
    let name = args.out.name.as_deref().unwrap_or("chain");

    if args.chains == 0 {
        return Err(CliError::usage("--chains must be at least 1"));
    }

    // One worker per chain; chain k gets seed + k.
    let mut runs: Vec<(u64, ChainConfig, Result<ChainOutput, otinfer_core::Error>)> =
        Vec::with_capacity(args.chains);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for k in 0..args.chains {
            let chain_config = ChainConfig {
                seed: config.seed + k as u64,
                ..config.clone()
            };
            let observation = &record.observation;
            let structure = &structure;
            handles.push((
                chain_config.seed,
                chain_config.clone(),
                scope.spawn(move || run_chain(observation, structure, &chain_config)),
            ));
        }
        for (seed, chain_config, handle) in handles {
            let result = handle.join().expect("chain worker panicked");
            runs.push((seed, chain_config, result));
        }
    });

    let mut paths: Vec<PathBuf> = Vec::new();
    for (seed, chain_config, result) in runs {
        let output = result?;
        let path = if args.chains == 1 {
            dir.join(format!("{name}.chain"))
        } else {
            dir.join(format!("{name}.{seed}.chain"))
        };
        persist_chain(&output, &chain_config, &path)?;
        print_acceptance(seed, &output.accept, output.solver_failures);
        paths.push(path);
    }

    let manifest_path = dir.join(format!("{name}.infer.manifest.json"));
    manifest.seed(config.seed).config(&config);
    for path in &paths {
        manifest.output(path);
    }
    manifest.write(&manifest_path)?;
    for path in &paths {
        println!("wrote {}", path.display());
    }
    println!("wrote {}", manifest_path.display());
    Ok(())
}

fn print_acceptance(seed: u64, accept: &BlockAccept, solver_failures: u64) {
    println!(
        "chain seed {seed}: acceptance % (overall, u, v, theta) = ({:.1}, {:.1}, {:.1}, {:.1})",
        accept.overall_rate() * 100.0,
        accept.u.rate() * 100.0,
        accept.v.rate() * 100.0,
        accept.theta.rate() * 100.0,
    );
    println!(
        "chain seed {seed}: in-box acceptance %                  = ({:.1}, {:.1}, {:.1}, {:.1})",
        accept.overall_metropolis_rate() * 100.0,
        accept.u.metropolis_rate() * 100.0,
        accept.v.metropolis_rate() * 100.0,
        accept.theta.metropolis_rate() * 100.0,
    );
    if solver_failures > 0 {
        println!("chain seed {seed}: {solver_failures} proposals rejected on solver failure");
    }
}

fn resolve_structure(
    args: &InferArgs,
    file: &ConfigFile,
    record: &ObservationRecord,
    manifest: &mut ManifestBuilder,
) -> Result<CostStructure, CliError> {
    if let Some(cost) = args.cost {
        if let Some(path) = &args.graph {
            manifest.input(path)?;
        }
        let c_bar = match args.c_bar {
            Some(c) => c,
            None => file.get::<f64>("c_bar")?.unwrap_or(10.0),
        };
        // The problem dimension always comes from the observation itself.
        return build_structure(cost, Some(record.n), args.graph.as_deref(), c_bar);
    }
    match &record.structure {
        Some(structure) => {
            let mut structure = structure.clone();
            if let Some(c_bar) = args.c_bar {
                structure.penalty = otinfer_core::PenaltySettings::new(c_bar)?;
            }
            Ok(structure)
        }
        None => Err(CliError::usage(
            "observation carries no cost structure; supply --cost (and --graph for graph costs)",
        )),
    }
}

pub(crate) fn resolve_config(
    args: &InferArgs,
    file: &ConfigFile,
    record: &ObservationRecord,
    manifest: &mut ManifestBuilder,
) -> Result<ChainConfig, CliError> {
    // Flags beat config-file entries beat defaults; sigma additionally falls
    // back to the level recorded with a synthetic observation.
    let provenance_sigma = match &record.provenance {
        Provenance::Synthetic { sigma, .. } if *sigma > 0.0 => Some(*sigma),
        _ => None,
    };
    let sigma = args
        .sigma
        .or(file.get("sigma")?)
        .or(provenance_sigma)
        .unwrap_or(0.04);
    let solver_arg = match (args.solver, file.get_str("solver")) {
        (Some(s), _) => s,
        (None, Some("exact")) => SolverArg::Exact,
        (None, Some("sinkhorn")) => SolverArg::Sinkhorn,
        (None, Some(other)) => {
            return Err(CliError::usage(format!(
                "config key solver must be exact or sinkhorn, got {other:?}"
            )))
        }
        (None, None) => SolverArg::Exact,
    };
    let epsilon = args.epsilon.or(file.get("epsilon")?).unwrap_or(0.04);
    let initial_state = match &args.init {
        Some(path) => {
            manifest.input(path)?;
            Some(load_latent_state(path)?)
        }
        None => None,
    };
    Ok(ChainConfig {
        sigma,
        delta_u: args.delta_u.or(file.get("delta_u")?).unwrap_or(0.2),
        delta_v: args.delta_v.or(file.get("delta_v")?).unwrap_or(0.2),
        delta_theta: args.delta_theta.or(file.get("delta_theta")?).unwrap_or(0.2),
        n_iterations: args.iterations.or(file.get("iterations")?).unwrap_or(500_000),
        burn_in: args.burn_in.or(file.get("burn_in")?).unwrap_or(300_000),
        seed: args.seed.or(file.get("seed")?).unwrap_or(1),
        solver: build_solver(solver_arg, epsilon),
        thinning: args.thinning.or(file.get("thinning")?).unwrap_or(1),
        initial_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;
    use otinfer_core::cost::{CostKind, PenaltySettings};
    use otinfer_core::{CostStructure, LatentState, ProbMatrix, SolverChoice};

    fn record() -> ObservationRecord {
        let structure =
            CostStructure::new(CostKind::Toeplitz { n: 2 }, PenaltySettings::default());
        ObservationRecord {
            n: 2,
            observation: ProbMatrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap(),
            provenance: Provenance::Synthetic {
                truth: LatentState {
                    u: vec![0.5, 0.5],
                    v: vec![0.5, 0.5],
                    theta: vec![0.3, 0.4],
                },
                sigma: 0.07,
                seed: 1,
                solver: SolverChoice::Exact,
            },
            structure: Some(structure),
        }
    }

    fn parse(extra: &[&str]) -> InferArgs {
        let mut argv = vec!["otinfer", "infer", "--observation", "obs.json"];
        argv.extend_from_slice(extra);
        match crate::args::Cli::try_parse_from(argv).unwrap().command {
            crate::args::Command::Infer(args) => args,
            _ => unreachable!(),
        }
    }

    #[test]
    fn defaults_follow_the_full_protocol() {
        let args = parse(&[]);
        let mut manifest = ManifestBuilder::new("infer");
        let config =
            resolve_config(&args, &ConfigFile::empty(), &record(), &mut manifest).unwrap();
        assert_eq!(config.n_iterations, 500_000);
        assert_eq!(config.burn_in, 300_000);
        assert_eq!(config.delta_u, 0.2);
        assert_eq!(config.delta_v, 0.2);
        assert_eq!(config.delta_theta, 0.2);
        assert_eq!(config.thinning, 1);
        assert_eq!(config.solver, SolverChoice::Exact);
        // Noise level falls back to what the synthetic observation recorded.
        assert_eq!(config.sigma, 0.07);
        // The staying penalty rides along with the recorded structure.
        assert_eq!(record().structure.unwrap().penalty.c_bar, 10.0);
    }

    #[test]
    fn sigma_flag_beats_the_recorded_level() {
        let args = parse(&["--sigma", "0.5"]);
        let mut manifest = ManifestBuilder::new("infer");
        let config =
            resolve_config(&args, &ConfigFile::empty(), &record(), &mut manifest).unwrap();
        assert_eq!(config.sigma, 0.5);
    }
}
