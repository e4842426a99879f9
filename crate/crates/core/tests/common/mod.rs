#![allow(dead_code)]

use bans::sampler::{LayerHyper, LayerProblem, LayerSampler, LayerState, NodeRow, SweepKind};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// Fixed-design working model for one layer: within-layer covariates `x`
/// and parents `pa` are held fixed while responses are regenerated.
pub struct FixedDesign {
    pub hyper: LayerHyper,
    pub x: DMatrix<f64>,
    pub pa: DMatrix<f64>,
}

impl FixedDesign {
    pub fn new(n: usize, m: usize, r: usize, hyper: LayerHyper, rng: &mut ChaCha8Rng) -> Self {
        let mut normal = |rows, cols| DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
        Self { x: normal(n, m), pa: normal(n, r), hyper }
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    pub fn r(&self) -> usize {
        self.pa.ncols()
    }

    pub fn problem(&self, y: &DMatrix<f64>) -> LayerProblem {
        LayerProblem::from_columns(y, &self.x, &self.pa, self.hyper.clone()).unwrap()
    }

    /// A draw of every parameter from the prior, with `η` symmetric.
    pub fn prior_rows(&self, rng: &mut ChaCha8Rng) -> Vec<NodeRow> {
        let (m, r, h) = (self.m(), self.r(), &self.hyper);
        let prob = |log_odds: f64| 1.0 / (1.0 + (-log_odds).exp());
        let mut eta = vec![vec![false; m]; m];
        for i in 0..m {
            for j in i + 1..m {
                let on = rng.random::<f64>() < prob(h.undir_log_odds[i * m + j]);
                eta[i][j] = on;
                eta[j][i] = on;
            }
        }
        let gamma = Gamma::new(h.kappa_shape(m), 1.0 / h.kappa_rate()).unwrap();
        (0..m)
            .map(|i| {
                let kappa: f64 = gamma.sample(rng);
                let alpha = (0..m)
                    .map(|j| if eta[i][j] { rng.sample::<f64, _>(StandardNormal) / (h.lambda * kappa).sqrt() } else { 0.0 })
                    .collect();
                let gam: Vec<bool> = (0..r).map(|a| rng.random::<f64>() < prob(h.dir_log_odds[i * r + a])).collect();
                let b = gam
                    .iter()
                    .map(|&g| if g { rng.sample::<f64, _>(StandardNormal) * (h.c2 / kappa).sqrt() } else { 0.0 })
                    .collect();
                NodeRow::new(eta[i].clone(), alpha, gam, b, kappa)
            })
            .collect()
    }

    /// `y_i = P b_i + Σ_j α_ij (x_j − P b_j) + e_i`, `e_i ~ N(0, 1/κ_i)`.
    pub fn responses(&self, rows: &[NodeRow], rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let (n, m) = self.x.shape();
        let fitted = |i: usize| &self.pa * nalgebra::DVector::from_column_slice(&rows[i].b);
        let adjusted: Vec<_> = (0..m).map(|j| self.x.column(j) - fitted(j)).collect();
        let mut y = DMatrix::zeros(n, m);
        for i in 0..m {
            let mut col = fitted(i);
            for j in 0..m {
                col += &adjusted[j] * rows[i].alpha[j];
            }
            for t in 0..n {
                col[t] += rng.sample::<f64, _>(StandardNormal) / rows[i].kappa.sqrt();
            }
            y.set_column(i, &col);
        }
        y
    }
}

pub fn statistics(rows: &[NodeRow]) -> Vec<f64> {
    let mut s = Vec::new();
    for row in rows {
        s.push(row.kappa.ln());
        s.push(row.alpha.iter().map(|a| a * a).sum::<f64>() * row.kappa);
        s.push(row.gamma.iter().filter(|&&g| g).count() as f64);
        s.push(row.b[0]);
        s.push(row.b.iter().map(|b| b * b).sum::<f64>() * row.kappa);
    }
    s.push(f64::from(u8::from(rows[0].eta[1])));
    s.push(rows[0].alpha[1]);
    s
}

pub const STATISTIC_NAMES: [&str; 12] = [
    "log kappa_1", "kappa_1 |alpha_1|^2", "|gamma_1|", "b_11", "kappa_1 |b_1|^2",
    "log kappa_2", "kappa_2 |alpha_2|^2", "|gamma_2|", "b_21", "kappa_2 |b_2|^2",
    "eta_12", "alpha_12",
];

#[derive(Debug)]
pub struct GewekeResult {
    pub name: &'static str,
    pub prior_mean: f64,
    pub chain_mean: f64,
    pub z: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Marginal-conditional draws against the successive-conditional chain
/// (sweep, then regenerate the responses), compared by z-scores whose
/// chain standard errors come from batch means.
pub fn geweke(n: usize, rounds: usize, seed: u64) -> Vec<GewekeResult> {
    geweke_with(LayerHyper::uniform(2.0, 2.0, 0.5, 0.5, 0.5, 2, 2), n, rounds, seed)
}

pub fn geweke_with(hyper: LayerHyper, n: usize, rounds: usize, seed: u64) -> Vec<GewekeResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = FixedDesign::new(n, 2, 2, hyper, &mut rng);

    let prior: Vec<Vec<f64>> = (0..rounds).map(|_| statistics(&design.prior_rows(&mut rng))).collect();

    let rows = design.prior_rows(&mut rng);
    let y = design.responses(&rows, &mut rng);
    let problem = design.problem(&y);
    let state = LayerState::from_rows(&problem, rows).unwrap();
    let mut sampler = LayerSampler::with_state(problem, state).unwrap();
    let mut chain = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        sampler.sweep(SweepKind::Bans, &mut rng).unwrap();
        let state = sampler.state();
        assert!(state.is_eta_symmetric() && state.violations() == 0);
        chain.push(statistics(state.rows()));
        let y = design.responses(state.rows(), &mut rng);
        sampler.set_problem(design.problem(&y)).unwrap();
    }

    let batch = rounds / 50;
    (0..STATISTIC_NAMES.len())
        .map(|k| {
            let a: Vec<f64> = prior.iter().map(|s| s[k]).collect();
            let b: Vec<f64> = chain.iter().map(|s| s[k]).collect();
            let means: Vec<f64> = b.chunks(batch).map(mean).collect();
            let se2 = variance(&a) / a.len() as f64 + variance(&means) / means.len() as f64;
            GewekeResult {
                name: STATISTIC_NAMES[k],
                prior_mean: mean(&a),
                chain_mean: mean(&b),
                z: (mean(&a) - mean(&b)) / se2.sqrt(),
            }
        })
        .collect()
}

/// A random layered graph on at most `p_max` vertices whose edges are drawn
/// from every permitted position with probability `edge_prob`.
pub fn random_graph(p_max: usize, edge_prob: f64, rng: &mut ChaCha8Rng) -> bans::graph::ChainGraph {
    use bans::graph::{ChainGraph, Layering};
    let p = rng.random_range(2..=p_max);
    let q = rng.random_range(1..=p.min(4));
    let layering = Layering::from_sizes(&bans::datagen::layer_sizes(p, q)).unwrap();
    let edges: Vec<_> = layering.candidate_edges().into_iter().filter(|_| rng.random_bool(edge_prob)).collect();
    ChainGraph::new(layering, edges).unwrap()
}

pub fn random_parameters(p_max: usize, edge_prob: f64, rng: &mut ChaCha8Rng) -> bans::datagen::MlggmParameters {
    let graph = random_graph(p_max, edge_prob, rng);
    bans::datagen::sample_parameters(&graph, &bans::datagen::GenConfig::default(), rng).unwrap()
}

/// Relabels vertices: old vertex `v` becomes `perm[v]`.
pub fn permute_matrix(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[(perm[i], perm[j])] = m[(i, j)];
        }
    }
    out
}

pub fn permute_columns(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (v, &w) in perm.iter().enumerate() {
        out.set_column(w, &m.column(v));
    }
    out
}

/// A random permutation that only moves vertices within their own layer.
pub fn within_layer_permutation(layering: &bans::graph::Layering, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut perm: Vec<usize> = (0..layering.p()).collect();
    for layer in layering.layers() {
        let mut shuffled = layer.clone();
        shuffled.shuffle(rng);
        for (&v, &w) in layer.iter().zip(&shuffled) {
            perm[v] = w;
        }
    }
    perm
}

pub fn permute_parameters(params: &bans::datagen::MlggmParameters, perm: &[usize]) -> bans::datagen::MlggmParameters {
    bans::datagen::MlggmParameters::new(
        params.layering().clone(),
        permute_matrix(params.b(), perm),
        permute_matrix(params.k(), perm),
    )
    .unwrap()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}
