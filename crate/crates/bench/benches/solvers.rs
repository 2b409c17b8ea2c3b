use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use otinfer_bench::{nine_vertex_graph, random_problem, random_state, toeplitz_structure};
use otinfer_core::cost::{shortest_path_costs, PenaltySettings};
use otinfer_core::data::generate_synthetic;
use otinfer_core::mcmc::{gibbs_sweep, ChainConfig, InverseProblem};
use otinfer_core::transport::{solve_exact, solve_sinkhorn, SinkhornSettings};
use otinfer_core::{PositiveVector, SolverChoice};

fn bench_exact(c: &mut Criterion) {
    let small = random_problem(1, 5);
    let large = random_problem(2, 9);
    c.bench_function("exact_5x5", |b| b.iter(|| solve_exact(&small).unwrap()));
    c.bench_function("exact_9x9", |b| b.iter(|| solve_exact(&large).unwrap()));
}

fn bench_sinkhorn(c: &mut Criterion) {
    let prob = random_problem(3, 9);
    let settings = SinkhornSettings::new(0.04);
    c.bench_function("sinkhorn_9x9_eps_0.04", |b| {
        b.iter(|| solve_sinkhorn(&prob, &settings).unwrap())
    });
}

fn bench_shortest_paths(c: &mut Criterion) {
    let graph = nine_vertex_graph();
    let weights: Vec<f64> = (0..graph.m()).map(|k| 0.1 + 0.025 * k as f64).collect();
    let f = PositiveVector::from_slice(&weights).unwrap();
    let penalty = PenaltySettings::default();
    c.bench_function("all_pairs_shortest_paths_9v_30e", |b| {
        b.iter(|| shortest_path_costs(&graph, &f, &penalty).unwrap())
    });
}

fn bench_gibbs_sweep(c: &mut Criterion) {
    let structure = toeplitz_structure(5);
    let truth = random_state(4, 5, structure.theta_len());
    let record = generate_synthetic(&truth, &structure, 0.1, 4, &SolverChoice::Exact).unwrap();
    let config = ChainConfig {
        sigma: 0.1,
        n_iterations: 10,
        burn_in: 1,
        seed: 4,
        ..ChainConfig::default()
    };
    let problem =
        InverseProblem::new(&record.observation, &structure, config.sigma, &config.solver)
            .unwrap();
    let mut state = truth.clone();
    let mut phi = problem.misfit(&state).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    c.bench_function("gibbs_sweep_toeplitz_n5_exact", |b| {
        b.iter(|| {
            let (next, next_phi, _) = gibbs_sweep(&problem, &state, phi, &config, &mut rng);
            state = next;
            phi = next_phi;
        })
    });
}

criterion_group!(
    benches,
    bench_exact,
    bench_sinkhorn,
    bench_shortest_paths,
    bench_gibbs_sweep
);
criterion_main!(benches);
