//! MCMC over the node-wise working model.
//!
//! Layers are independent sub-problems: each gets its own sufficient
//! statistics ([`LayerProblem`]), sampler ([`LayerSampler`]) and random
//! stream(s), and the per-layer traces are merged into one
//! [`ChainTrace`]. Results do not depend on how layers (or, for
//! BANS-parallel, vertices) are scheduled.

mod design;
mod kernel;
mod layer;
mod prior;
mod problem;
mod state;
mod trace;

use serde::{Deserialize, Serialize};

pub use design::{build_directed_design, build_undirected_design, stacked_coefficients};
pub use layer::{LayerSampler, SweepKind};
pub use prior::PriorConfig;
pub use problem::{LayerHyper, LayerProblem};
pub use state::{LayerState, NodeRow, SamplerState};
pub use trace::{candidate_index, ChainTrace, LayerTrace, TraceSummary};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::Edge;
use crate::rng::{stream, Purpose, StreamKey, StreamRng};

/// Layers smaller than this are swept vertex by vertex even when
/// BANS-parallel may use threads.
pub const PARALLEL_MIN_VERTICES: usize = 8;

/// How the two within-layer indicators `η_vw`, `η_wv` of BANS-parallel are
/// combined into one edge probability.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetrize {
    /// `min(g_vw, g_wv)`
    #[default]
    And,
    /// `max(g_vw, g_wv)`
    Or,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMode {
    #[default]
    Bans,
    BansParallel(Symmetrize),
}

impl SamplerMode {
    /// Rule for combining half-edge frequencies. Under BANS both halves are
    /// identical so the choice is immaterial.
    pub fn symmetrize(self) -> Symmetrize {
        match self {
            SamplerMode::Bans => Symmetrize::And,
            SamplerMode::BansParallel(s) => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Total sweeps, including burn-in.
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub replicate: u32,
    pub chain: u8,
    #[serde(skip)]
    pub execution: Execution,
    /// Scale columns to unit variance after centering.
    pub standardize: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_iter: 30_000,
            burn_in: 10_000,
            thin: 1,
            seed: 1,
            replicate: 0,
            chain: 0,
            execution: Execution::default(),
            standardize: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::ConfigInvalid("thin must be at least 1".into()));
        }
        if self.burn_in > self.n_iter {
            return Err(Error::ConfigInvalid(format!(
                "burn-in {} exceeds total iterations {}",
                self.burn_in, self.n_iter
            )));
        }
        if self.retained() == 0 {
            return Err(Error::EmptyTrace);
        }
        Ok(())
    }

    /// `(n_iter − burn_in) / thin`.
    pub fn retained(&self) -> usize {
        (self.n_iter - self.burn_in.min(self.n_iter)) / self.thin.max(1)
    }

    fn keeps(&self, t: usize) -> bool {
        t >= self.burn_in && (t - self.burn_in + 1).is_multiple_of(self.thin)
    }

    fn key(&self, purpose: Purpose) -> StreamKey {
        StreamKey::new(purpose).replicate(self.replicate).chain(self.chain)
    }
}

/// Validates and centers (optionally standardizes) the data.
pub fn prepare(data: &Dataset, cfg: &RunConfig) -> Result<Dataset> {
    data.check()?;
    Ok(if cfg.standardize { data.standardized() } else { data.centered() })
}

pub fn layer_problems(data: &Dataset, prior: &PriorConfig) -> Result<Vec<LayerProblem>> {
    prior.validate()?;
    let gram = data.gram();
    (0..data.layering().q())
        .map(|k| LayerProblem::from_gram(&gram, data.n(), data.layering(), k, prior))
        .collect()
}

fn asymmetric_pairs(state: &LayerState) -> usize {
    let rows = state.rows();
    (0..rows.len()).map(|i| (0..i).filter(|&j| rows[i].eta[j] != rows[j].eta[i]).count()).sum()
}

enum Schedule {
    Bans(StreamRng),
    Fixed(StreamRng),
    Parallel(Vec<StreamRng>, Execution),
}

fn run_layer(mut sampler: LayerSampler, mut schedule: Schedule, cfg: &RunConfig) -> Result<LayerTrace> {
    let mut trace = LayerTrace::new(sampler.problem().vertices(), sampler.problem().parents());
    for t in 0..cfg.n_iter {
        match &mut schedule {
            Schedule::Bans(rng) => sampler.sweep(SweepKind::Bans, rng)?,
            Schedule::Fixed(rng) => sampler.sweep(SweepKind::Fixed, rng)?,
            Schedule::Parallel(rngs, exec) => sampler.sweep_parallel(rngs, *exec)?,
        }
        if cfg.keeps(t) {
            let state = sampler.state();
            let mut bad = state.violations();
            if !matches!(schedule, Schedule::Parallel(..)) {
                bad += asymmetric_pairs(state);
            }
            trace.record(state, sampler.log_likelihood(), bad);
        }
    }
    Ok(trace)
}

/// Runs BANS or BANS-parallel on centered copies of `data`.
pub fn run(data: &Dataset, prior: &PriorConfig, cfg: &RunConfig, mode: SamplerMode) -> Result<ChainTrace> {
    cfg.validate()?;
    let data = prepare(data, cfg)?;
    let problems = layer_problems(&data, prior)?;
    let key = cfg.key(Purpose::Sampler);
    let exec = cfg.execution;
    let traces = exec.install(|| {
        exec.map(problems.len(), |k| {
            let problem = problems[k].clone();
            let vertices = problem.vertices().to_vec();
            let schedule = match mode {
                SamplerMode::Bans => Schedule::Bans(stream(cfg.seed, key.unit(vertices[0] as u32))),
                SamplerMode::BansParallel(_) => {
                    let rngs = vertices.iter().map(|&v| stream(cfg.seed, key.unit(v as u32))).collect();
                    let inner = if vertices.len() >= PARALLEL_MIN_VERTICES { exec } else { Execution::Sequential };
                    Schedule::Parallel(rngs, inner)
                }
            };
            run_layer(LayerSampler::new(problem), schedule, cfg)
        })
    });
    let traces = traces.into_iter().collect::<Result<Vec<_>>>()?;
    ChainTrace::merge(data.layering(), mode, &traces)
}

pub fn run_bans(data: &Dataset, prior: &PriorConfig, cfg: &RunConfig) -> Result<ChainTrace> {
    run(data, prior, cfg, SamplerMode::Bans)
}

pub fn run_bans_parallel(data: &Dataset, prior: &PriorConfig, cfg: &RunConfig, sym: Symmetrize) -> Result<ChainTrace> {
    run(data, prior, cfg, SamplerMode::BansParallel(sym))
}

/// Posterior sign probabilities of a fixed set of edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignPosterior {
    pub edges: Vec<Edge>,
    /// `P(coefficient > 0 | data)`
    pub prob_positive: Vec<f64>,
    pub mean: Vec<f64>,
}

impl SignPosterior {
    pub fn get(&self, e: Edge) -> Option<f64> {
        self.edges.iter().position(|&x| x == e).map(|i| self.prob_positive[i])
    }
}

/// Coefficient and precision updates with the structure held at `edges`.
pub fn structured_sign_run(data: &Dataset, edges: &[Edge], prior: &PriorConfig, cfg: &RunConfig) -> Result<SignPosterior> {
    cfg.validate()?;
    let layering = data.layering();
    if let Some(bad) = edges.iter().find(|&&e| !layering.permits(e)) {
        return Err(Error::StructureInconsistent(bad.to_string()));
    }
    let data = prepare(data, cfg)?;
    let problems = layer_problems(&data, prior)?;
    let mut structure = SamplerState::empty(data.p());
    for &e in edges {
        match e {
            Edge::Directed { from, to } => structure.gamma[(to, from)] = true,
            Edge::Undirected(u, v) => {
                structure.eta[(u, v)] = true;
                structure.eta[(v, u)] = true;
            }
        }
    }
    let key = cfg.key(Purpose::Signs);
    let exec = cfg.execution;
    let traces = exec.install(|| {
        exec.map(problems.len(), |k| {
            let problem = problems[k].clone();
            let mut state = LayerState::initial(&problem);
            for (i, row) in state.rows.iter_mut().enumerate() {
                let v = problem.vertices()[i];
                for (j, &w) in problem.vertices().iter().enumerate() {
                    row.eta[j] = structure.eta[(v, w)];
                }
                for (a, &w) in problem.parents().iter().enumerate() {
                    row.gamma[a] = structure.gamma[(v, w)];
                }
            }
            let rng = stream(cfg.seed, key.unit(problem.vertices()[0] as u32));
            run_layer(LayerSampler::with_state(problem, state)?, Schedule::Fixed(rng), cfg)
        })
    });
    let traces = traces.into_iter().collect::<Result<Vec<_>>>()?;
    let chain = ChainTrace::merge(layering, SamplerMode::Bans, &traces)?;
    let mut out = SignPosterior { edges: edges.to_vec(), prob_positive: Vec::new(), mean: Vec::new() };
    for &e in edges {
        let idx = chain.edge_index(e).ok_or_else(|| Error::StructureInconsistent(e.to_string()))?;
        out.prob_positive.push(chain.positive_frequency(idx));
        out.mean.push(chain.mean_coefficient(idx));
    }
    Ok(out)
}
