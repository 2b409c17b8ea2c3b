use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use otinfer_core::data::generate_synthetic;
use otinfer_core::LatentState;

use crate::args::SimulateArgs;
use crate::error::CliError;
use crate::manifest::ManifestBuilder;

use super::{build_solver, build_structure, load_latent_state, save_json};

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("simulate");
    let structure = build_structure(args.cost, args.n, args.graph.as_deref(), args.c_bar)?;
    if let Some(path) = &args.graph {
        manifest.input(path)?;
    }
    let solver = build_solver(args.solver, args.epsilon);

    // Truth comes from a file, or componentwise uniform on (0.05, 1] drawn
    // from the seed; the noise stream continues from the same generator so
    // the two never overlap.
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (truth, noise_seed) = match &args.truth {
        Some(path) => {
            manifest.input(path)?;
            (load_latent_state(path)?, args.seed)
        }
        None => {
            let n = structure.n();
            let theta_len = structure.theta_len();
            let mut draw = |len: usize| -> Vec<f64> {
                (0..len).map(|_| 1.0 - 0.95 * rng.gen::<f64>()).collect()
            };
            let truth = LatentState {
                u: draw(n),
                v: draw(n),
                theta: draw(theta_len),
            };
            (truth, rng.gen())
        }
    };

    let record = generate_synthetic(&truth, &structure, args.sigma, noise_seed, &solver)?;

    let dir = args.out.resolve_dir();
    std::fs::create_dir_all(&dir)?;
    let name = args.out.name.as_deref().unwrap_or("sim");
    let obs_path = dir.join(format!("{name}.observation.json"));
    let truth_path = dir.join(format!("{name}.truth.json"));
    let manifest_path = dir.join(format!("{name}.simulate.manifest.json"));

    record.save(&obs_path)?;
    save_json(&truth_path, &truth)?;

    manifest
        .seed(args.seed)
        .config(serde_json::json!({
            "structure": structure,
            "sigma": args.sigma,
            "solver": build_solver(args.solver, args.epsilon),
            "noise_seed": noise_seed,
        }))
        .output(&obs_path)
        .output(&truth_path)
        .write(&manifest_path)?;

    println!("wrote {}", obs_path.display());
    println!("wrote {}", truth_path.display());
    println!("wrote {}", manifest_path.display());
    Ok(())
}
