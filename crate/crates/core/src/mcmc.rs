//! Bayesian inversion of noisy transport plans.
//!
//! The latent state holds unnormalized marginals `u`, `v` and flat cost
//! parameters `theta`, all constrained to the unit box by a uniform prior.
//! The forward map normalizes the blocks, builds the cost matrix, and solves
//! the transport problem; the misfit is the squared Frobenius data mismatch
//! scaled by `1 / (2 sigma^2)`. Sampling is random-walk Metropolis within
//! Gibbs: per sweep each block in turn receives an isotropic Gaussian
//! proposal that is auto-rejected outside the box and otherwise accepted
//! with the Metropolis probability `min(1, exp(phi_cur - phi_prop))`.
//!
//! Reproducibility contract: one chain consumes a single ChaCha8 stream
//! seeded from `config.seed`. Per sweep the draw order is fixed (u-block
//! noise, u accept uniform, v-block noise, v accept uniform, theta-block
//! noise, theta accept uniform) and every draw happens whether or not the
//! proposal survives the box check, so identical seeds give bit-identical
//! chains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cost::CostStructure;
use crate::error::{Error, Result};
use crate::simplex::{frobenius_distance_sq, normalize_vector, PositiveVector, ProbMatrix};
use crate::transport::{SolverChoice, TransportProblem};

/// The three Gibbs blocks.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Block {
    U,
    V,
    Theta,
}

impl Block {
    pub const ALL: [Block; 3] = [Block::U, Block::V, Block::Theta];
}

/// Unnormalized latent variables the posterior is defined over. Every
/// component lives in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
}

impl LatentState {
    pub fn block(&self, block: Block) -> &[f64] {
        match block {
            Block::U => &self.u,
            Block::V => &self.v,
            Block::Theta => &self.theta,
        }
    }

    pub fn with_block(&self, block: Block, values: Vec<f64>) -> Self {
        let mut next = self.clone();
        match block {
            Block::U => next.u = values,
            Block::V => next.v = values,
            Block::Theta => next.theta = values,
        }
        next
    }

    /// Prior support check: every component in the closed unit box.
    pub fn in_unit_box(&self) -> bool {
        self.u
            .iter()
            .chain(&self.v)
            .chain(&self.theta)
            .all(|&x| (0.0..=1.0).contains(&x))
    }

    /// Concatenated scale-free representation: each block divided by its own
    /// sum, in block order `u, v, theta`. This is the quantity posterior
    /// summaries and plots are computed over.
    pub fn normalized_components(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.u.len() + self.v.len() + self.theta.len());
        for (name, block) in [("u", &self.u), ("v", &self.v), ("theta", &self.theta)] {
            if block.is_empty() {
                continue;
            }
            let sum: f64 = block.iter().sum();
            if sum <= 0.0 {
                return Err(Error::DegenerateLatent(format!(
                    "block {name} has zero total mass"
                )));
            }
            out.extend(block.iter().map(|x| x / sum));
        }
        Ok(out)
    }
}

/// Everything a chain needs besides the observation and the cost structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Observation noise standard deviation entering the misfit.
    pub sigma: f64,
    /// Proposal standard deviation per block.
    pub delta_u: f64,
    pub delta_v: f64,
    pub delta_theta: f64,
    pub n_iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub solver: SolverChoice,
    /// Stride between retained post-burn-in samples.
    pub thinning: usize,
    /// Start the chain here instead of drawing a random initial state.
    pub initial_state: Option<LatentState>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            sigma: 0.04,
            delta_u: 0.2,
            delta_v: 0.2,
            delta_theta: 0.2,
            n_iterations: 500_000,
            burn_in: 300_000,
            seed: 1,
            solver: SolverChoice::Exact,
            thinning: 1,
            initial_state: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("sigma", self.sigma),
            ("delta_u", self.delta_u),
            ("delta_v", self.delta_v),
            ("delta_theta", self.delta_theta),
        ] {
            if !x.is_finite() || x <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive, got {x}")));
            }
        }
        if self.n_iterations == 0 {
            return Err(Error::Config("n_iterations must be at least 1".into()));
        }
        if self.burn_in >= self.n_iterations {
            return Err(Error::Config(format!(
                "burn_in {} must be smaller than n_iterations {}",
                self.burn_in, self.n_iterations
            )));
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        if let SolverChoice::Sinkhorn(settings) = &self.solver {
            settings.validate()?;
        }
        Ok(())
    }

    pub fn delta(&self, block: Block) -> f64 {
        match block {
            Block::U => self.delta_u,
            Block::V => self.delta_v,
            Block::Theta => self.delta_theta,
        }
    }
}

/// Acceptance counters for one block. `proposed` counts every sweep;
/// `out_of_box` the proposals auto-rejected by the prior box before any
/// forward solve.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptCounts {
    pub accepted: u64,
    pub proposed: u64,
    #[serde(default)]
    pub out_of_box: u64,
}

impl AcceptCounts {
    /// Accepted over everything proposed, box auto-rejections included.
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// Accepted over proposals that survived the box check, i.e. the rate of
    /// the Metropolis decision itself.
    pub fn metropolis_rate(&self) -> f64 {
        let considered = self.proposed - self.out_of_box;
        if considered == 0 {
            0.0
        } else {
            self.accepted as f64 / considered as f64
        }
    }
}

/// Per-block acceptance accounting.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockAccept {
    pub u: AcceptCounts,
    pub v: AcceptCounts,
    pub theta: AcceptCounts,
}

impl BlockAccept {
    fn totals(&self) -> AcceptCounts {
        AcceptCounts {
            accepted: self.u.accepted + self.v.accepted + self.theta.accepted,
            proposed: self.u.proposed + self.v.proposed + self.theta.proposed,
            out_of_box: self.u.out_of_box + self.v.out_of_box + self.theta.out_of_box,
        }
    }

    pub fn overall_rate(&self) -> f64 {
        self.totals().rate()
    }

    pub fn overall_metropolis_rate(&self) -> f64 {
        self.totals().metropolis_rate()
    }
}

/// Everything a finished chain produced.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    /// Post-burn-in states at the thinning stride.
    pub samples: Vec<LatentState>,
    pub accept: BlockAccept,
    /// Misfit of the current state after each full sweep, one per iteration.
    pub misfit_trace: Vec<f64>,
    /// Cumulative means of the normalized components, one row per retained
    /// sample, aligned with `samples`.
    pub running_means: Vec<Vec<f64>>,
    /// Forward-solver failures encountered while evaluating proposals; each
    /// one rejected the proposal instead of aborting the chain.
    pub solver_failures: u64,
}

/// A posterior over latent marginals and cost parameters, determined by an
/// observed plan, a cost structure, the noise level, and a forward solver.
#[derive(Clone, Debug)]
pub struct InverseProblem<'a> {
    pub observation: &'a ProbMatrix,
    pub structure: &'a CostStructure,
    pub sigma: f64,
    pub solver: &'a SolverChoice,
}

impl<'a> InverseProblem<'a> {
    pub fn new(
        observation: &'a ProbMatrix,
        structure: &'a CostStructure,
        sigma: f64,
        solver: &'a SolverChoice,
    ) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        if observation.n() != structure.n() {
            return Err(Error::Shape(format!(
                "observation is {}x{} but the cost structure has n = {}",
                observation.n(),
                observation.n(),
                structure.n()
            )));
        }
        Ok(Self {
            observation,
            structure,
            sigma,
            solver,
        })
    }

    pub fn forward(&self, state: &LatentState) -> Result<ProbMatrix> {
        forward_map(state, self.structure, self.solver)
    }

    pub fn misfit(&self, state: &LatentState) -> Result<f64> {
        misfit(
            state,
            self.observation,
            self.sigma,
            self.structure,
            self.solver,
        )
    }

    /// Log posterior density up to an additive constant: `-phi` inside the
    /// unit box, negative infinity outside. The normalization constant is
    /// never computed.
    pub fn log_posterior(&self, state: &LatentState) -> Result<f64> {
        if !state.in_unit_box() {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(-self.misfit(state)?)
    }

    /// Metropolis acceptance probability for a symmetric proposal. Box
    /// membership of the proposal is handled upstream as an auto-reject;
    /// here both states are evaluated through the same forward solver.
    pub fn acceptance_probability(
        &self,
        current: &LatentState,
        proposal: &LatentState,
    ) -> Result<f64> {
        let phi_current = self.misfit(current)?;
        let phi_proposal = self.misfit(proposal)?;
        Ok(acceptance_from_misfits(phi_current, phi_proposal))
    }
}

/// `min(1, exp(phi_current - phi_proposal))`: any proposal that does not
/// increase the misfit is accepted with probability one.
pub fn acceptance_from_misfits(phi_current: f64, phi_proposal: f64) -> f64 {
    if phi_proposal <= phi_current {
        1.0
    } else {
        (phi_current - phi_proposal).exp()
    }
}

/// Solve the forward problem at a latent state: normalize `u` and `v` into
/// marginals, build the normalized cost from `theta`, and return the optimal
/// plan. The plan is projected back onto the simplex by exact division so
/// solver round-off never leaks into the returned matrix.
pub fn forward_map(
    state: &LatentState,
    structure: &CostStructure,
    solver: &SolverChoice,
) -> Result<ProbMatrix> {
    let p = normalize_vector(&PositiveVector::from_slice(&state.u)?)?;
    let q = normalize_vector(&PositiveVector::from_slice(&state.v)?)?;
    let cost = structure.build_cost_from_flat(&state.theta)?;
    let problem = TransportProblem::new(p, q, cost)?;
    let report = solver.solve(&problem)?;
    let plan = report.coupling.into_plan();
    let total = plan.sum();
    ProbMatrix::new(&plan / total)
}

/// Model-data misfit `phi = |T - G(state)|^2 / (2 sigma^2)`.
pub fn misfit(
    state: &LatentState,
    observation: &ProbMatrix,
    sigma: f64,
    structure: &CostStructure,
    solver: &SolverChoice,
) -> Result<f64> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    let predicted = forward_map(state, structure, solver)?;
    let dist_sq = frobenius_distance_sq(observation.as_array(), predicted.as_array())?;
    Ok(dist_sq / (2.0 * sigma * sigma))
}

/// What one sweep did, per block.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct SweepReport {
    pub accepted: [bool; 3],
    pub out_of_box: [bool; 3],
    pub solver_failures: u8,
}

/// One random-walk Metropolis-within-Gibbs sweep over the three blocks.
///
/// `phi_current` must be the misfit of `state`; the updated pair is returned
/// so callers never re-evaluate the forward map for states they already
/// visited. Solver failures while evaluating a proposal reject that proposal
/// and are counted in the report.
pub fn gibbs_sweep<R: Rng>(
    problem: &InverseProblem<'_>,
    state: &LatentState,
    phi_current: f64,
    config: &ChainConfig,
    rng: &mut R,
) -> (LatentState, f64, SweepReport) {
    let deltas = [config.delta_u, config.delta_v, config.delta_theta];
    sweep_with(state, phi_current, deltas, &mut |s| problem.misfit(s), rng)
}

fn sweep_with<R: Rng>(
    state: &LatentState,
    phi_current: f64,
    deltas: [f64; 3],
    eval_phi: &mut dyn FnMut(&LatentState) -> Result<f64>,
    rng: &mut R,
) -> (LatentState, f64, SweepReport) {
    let mut current = state.clone();
    let mut phi = phi_current;
    let mut report = SweepReport::default();

    for (slot, block) in Block::ALL.into_iter().enumerate() {
        let delta = deltas[slot];
        let mut proposal_block = current.block(block).to_vec();
        for x in &mut proposal_block {
            let noise: f64 = rng.sample(StandardNormal);
            *x += delta * noise;
        }
        // Drawn unconditionally to keep the stream layout fixed per sweep.
        let accept_draw: f64 = rng.gen();

        if proposal_block.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            report.out_of_box[slot] = true; // left the prior box: auto-reject
            continue;
        }
        let proposal = current.with_block(block, proposal_block);
        match eval_phi(&proposal) {
            Err(_) => report.solver_failures += 1,
            Ok(phi_proposal) => {
                if accept_draw < acceptance_from_misfits(phi, phi_proposal) {
                    current = proposal;
                    phi = phi_proposal;
                    report.accepted[slot] = true;
                }
            }
        }
    }
    (current, phi, report)
}

/// Run a full chain. Deterministic given `(observation, structure, config)`.
///
/// The initial state is either `config.initial_state` or, by default, drawn
/// componentwise uniform on `(0.05, 1]` from the seeded stream, retrying up
/// to ten times if the forward solve fails. The misfit trace records the
/// post-sweep misfit for every iteration; samples are retained after
/// `burn_in` at the `thinning` stride.
pub fn run_chain(
    observation: &ProbMatrix,
    structure: &CostStructure,
    config: &ChainConfig,
) -> Result<ChainOutput> {
    config.validate()?;
    let problem = InverseProblem::new(observation, structure, config.sigma, &config.solver)?;
    let n = structure.n();
    let theta_len = structure.theta_len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let (mut state, mut phi) = match &config.initial_state {
        Some(init) => {
            if init.u.len() != n || init.v.len() != n || init.theta.len() != theta_len {
                return Err(Error::Shape(format!(
                    "initial state has blocks ({}, {}, {}), expected ({n}, {n}, {theta_len})",
                    init.u.len(),
                    init.v.len(),
                    init.theta.len()
                )));
            }
            if !init.in_unit_box() {
                return Err(Error::Config(
                    "initial state lies outside the unit box".into(),
                ));
            }
            let phi = problem.misfit(init).map_err(|e| Error::ChainInit {
                attempts: 1,
                last: e.to_string(),
            })?;
            (init.clone(), phi)
        }
        None => {
            const INIT_ATTEMPTS: usize = 10;
            let mut last = String::from("no attempt made");
            let mut found = None;
            for _ in 0..INIT_ATTEMPTS {
                let mut draw_block = |len: usize| -> Vec<f64> {
                    (0..len).map(|_| 1.0 - 0.95 * rng.gen::<f64>()).collect()
                };
                let candidate = LatentState {
                    u: draw_block(n),
                    v: draw_block(n),
                    theta: draw_block(theta_len),
                };
                match problem.misfit(&candidate) {
                    Ok(phi) => {
                        found = Some((candidate, phi));
                        break;
                    }
                    Err(e) => last = e.to_string(),
                }
            }
            found.ok_or(Error::ChainInit {
                attempts: INIT_ATTEMPTS,
                last,
            })?
        }
    };

    let mut accept = BlockAccept::default();
    let mut solver_failures = 0u64;
    let mut misfit_trace = Vec::with_capacity(config.n_iterations);
    let mut samples = Vec::new();
    let mut running_means: Vec<Vec<f64>> = Vec::new();
    let mut cumulative: Vec<f64> = Vec::new();

    for iteration in 1..=config.n_iterations {
        let (next, next_phi, report) = gibbs_sweep(&problem, &state, phi, config, &mut rng);
        state = next;
        phi = next_phi;

        for (slot, counts) in [&mut accept.u, &mut accept.v, &mut accept.theta]
            .into_iter()
            .enumerate()
        {
            counts.proposed += 1;
            counts.accepted += report.accepted[slot] as u64;
            counts.out_of_box += report.out_of_box[slot] as u64;
        }
        solver_failures += report.solver_failures as u64;
        misfit_trace.push(phi);

        if iteration > config.burn_in
            && (iteration - config.burn_in - 1).is_multiple_of(config.thinning)
        {
            let normalized = state.normalized_components()?;
            if cumulative.is_empty() {
                cumulative = vec![0.0; normalized.len()];
            }
            for (acc, x) in cumulative.iter_mut().zip(&normalized) {
                *acc += x;
            }
            let count = (samples.len() + 1) as f64;
            running_means.push(cumulative.iter().map(|acc| acc / count).collect());
            samples.push(state.clone());
        }
    }

    Ok(ChainOutput {
        samples,
        accept,
        misfit_trace,
        running_means,
        solver_failures,
    })
}

/// Five-number quantile summary of one posterior component.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q025: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q975: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges spanning the sample range.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub label: String,
    pub mean: f64,
    pub std: f64,
    pub quantiles: Quantiles,
    pub histogram: Histogram,
}

/// Posterior summaries over the normalized components of the retained
/// samples: per component the mean, sample standard deviation, quantiles,
/// and a histogram with `bins` equal-width bins.
pub fn posterior_summary(output: &ChainOutput, bins: usize) -> Result<Vec<ComponentSummary>> {
    if output.samples.len() < 2 {
        return Err(Error::EmptyChain(output.samples.len()));
    }
    let bins = bins.max(1);
    let first = &output.samples[0];
    let labels: Vec<String> = component_labels(first.u.len(), first.v.len(), first.theta.len());

    let normalized: Vec<Vec<f64>> = output
        .samples
        .iter()
        .map(LatentState::normalized_components)
        .collect::<Result<_>>()?;
    let n_comps = normalized[0].len();
    debug_assert_eq!(n_comps, labels.len());

    let mut summaries = Vec::with_capacity(n_comps);
    for comp in 0..n_comps {
        let mut series: Vec<f64> = normalized.iter().map(|row| row[comp]).collect();
        let n = series.len() as f64;
        let mean = series.iter().sum::<f64>() / n;
        let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        series.sort_by(f64::total_cmp);
        let quantiles = Quantiles {
            q025: quantile_sorted(&series, 0.025),
            q25: quantile_sorted(&series, 0.25),
            median: quantile_sorted(&series, 0.5),
            q75: quantile_sorted(&series, 0.75),
            q975: quantile_sorted(&series, 0.975),
        };
        summaries.push(ComponentSummary {
            label: labels[comp].clone(),
            mean,
            std: var.sqrt(),
            quantiles,
            histogram: histogram(&series, bins),
        });
    }
    Ok(summaries)
}

/// Labels in normalized-component order: `u0..`, `v0..`, `theta0..`.
pub fn component_labels(n_u: usize, n_v: usize, n_theta: usize) -> Vec<String> {
    let mut labels = Vec::with_capacity(n_u + n_v + n_theta);
    labels.extend((0..n_u).map(|i| format!("u{i}")));
    labels.extend((0..n_v).map(|i| format!("v{i}")));
    labels.extend((0..n_theta).map(|i| format!("theta{i}")));
    labels
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile_sorted(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = alpha * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn histogram(sorted: &[f64], bins: usize) -> Histogram {
    let (mut lo, mut hi) = (sorted[0], sorted[sorted.len() - 1]);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
    let mut counts = vec![0u64; bins];
    for &x in sorted {
        let idx = (((x - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Histogram { edges, counts }
}
