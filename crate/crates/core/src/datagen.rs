//! Random chain graphs, model parameters and exact sampling.
//!
//! The generating model is `Y = B Y + ε`, `ε ~ N(0, K⁻¹)`, so that `Y` has
//! precision `Ω = (I − B)ᵀ K (I − B)`. `B` is strictly lower
//! block-triangular in layer order and `K` is block-diagonal by layer.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{ChainGraph, Edge, Independence, Layering};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub p: usize,
    pub n: usize,
    pub q: usize,
    /// Within-layer edge probability; consecutive-layer directed edges use half of it.
    pub edge_prob: f64,
    pub magnitude_low: f64,
    pub magnitude_high: f64,
    /// Added to the diagonal of `K` on top of the absolute row sums.
    pub diag_pad: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            p: 20,
            n: 200,
            q: 6,
            edge_prob: 0.3,
            magnitude_low: 0.5,
            magnitude_high: 1.5,
            diag_pad: 0.1,
            seed: 1,
        }
    }
}

impl GenConfig {
    pub fn scenario(p: usize, n: usize, q: usize, edge_prob: f64) -> Self {
        Self { p, n, q, edge_prob, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.to_string()));
        if self.q == 0 || self.q > self.p {
            return bad("need 1 <= q <= p");
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return bad("edge probability must lie in [0, 1]");
        }
        if !(self.magnitude_low >= 0.0 && self.magnitude_low < self.magnitude_high) {
            return bad("need 0 <= magnitude_low < magnitude_high");
        }
        if !(self.diag_pad > 0.0) {
            return bad("diag_pad must be positive");
        }
        Ok(())
    }
}

/// Layer sizes differing by at most one; the first `p mod q` layers get the
/// extra vertex.
pub fn layer_sizes(p: usize, q: usize) -> Vec<usize> {
    (0..q).map(|k| p / q + usize::from(k < p % q)).collect()
}

/// Erdős–Rényi layers joined by random consecutive-layer arrows.
///
/// Each within-layer pair is an undirected edge with probability `p_E`
/// and each pair between consecutive layers is an arrow with probability
/// `p_E / 2`. Arrows that skip a layer are never generated.
pub fn random_chain_graph<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Result<ChainGraph> {
    cfg.validate()?;
    let layering = Layering::from_sizes(&layer_sizes(cfg.p, cfg.q))?;
    let mut edges = Vec::new();
    for layer in layering.layers() {
        for (i, &u) in layer.iter().enumerate() {
            for &v in &layer[i + 1..] {
                if rng.random_bool(cfg.edge_prob) {
                    edges.push(Edge::undirected(u, v));
                }
            }
        }
    }
    for pair in layering.layers().windows(2) {
        for &to in &pair[1] {
            for &from in &pair[0] {
                if rng.random_bool(cfg.edge_prob / 2.0) {
                    edges.push(Edge::directed(from, to));
                }
            }
        }
    }
    ChainGraph::new(layering, edges)
}

/// Expected number of edges produced by [`random_chain_graph`].
pub fn expected_edge_count(cfg: &GenConfig) -> f64 {
    let sizes = layer_sizes(cfg.p, cfg.q);
    let within: f64 = sizes.iter().map(|&s| (s * s.saturating_sub(1) / 2) as f64).sum();
    let between: f64 = sizes.windows(2).map(|w| (w[0] * w[1]) as f64).sum();
    within * cfg.edge_prob + between * cfg.edge_prob / 2.0
}

/// Coefficient matrix `B` and residual precision `K` of a layered model.
#[derive(Clone, Debug, PartialEq)]
pub struct MlggmParameters {
    layering: Layering,
    b: DMatrix<f64>,
    k: DMatrix<f64>,
}

impl MlggmParameters {
    /// Checks the block structure of `B` and `K` and positive definiteness
    /// of every layer block of `K`.
    pub fn new(layering: Layering, b: DMatrix<f64>, k: DMatrix<f64>) -> Result<Self> {
        let p = layering.p();
        if b.shape() != (p, p) || k.shape() != (p, p) {
            return Err(Error::DimensionMismatch(format!("B and K must be {p}x{p}")));
        }
        for v in 0..p {
            for u in 0..p {
                let (tu, tv) = (layering.layer_of(u), layering.layer_of(v));
                if tu >= tv && b[(v, u)] != 0.0 {
                    return Err(Error::ConfigInvalid(format!(
                        "B[{},{}] must be zero: {} is not in an earlier layer than {}",
                        v + 1,
                        u + 1,
                        u + 1,
                        v + 1
                    )));
                }
                if tu != tv && k[(v, u)] != 0.0 {
                    return Err(Error::ConfigInvalid(format!(
                        "K[{},{}] must be zero across layers",
                        v + 1,
                        u + 1
                    )));
                }
                if k[(v, u)] != k[(u, v)] {
                    return Err(Error::ConfigInvalid("K must be symmetric".into()));
                }
            }
        }
        let out = Self { layering, b, k };
        for t in 0..out.layering.q() {
            out.layer_precision(t)
                .cholesky()
                .ok_or_else(|| Error::FactorizationFailure(format!("K block of layer {} is not PD", t + 1)))?;
        }
        Ok(out)
    }

    pub fn layering(&self) -> &Layering {
        &self.layering
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn p(&self) -> usize {
        self.layering.p()
    }

    fn layer_precision(&self, t: usize) -> DMatrix<f64> {
        let idx = self.layering.layer(t);
        DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.k[(idx[i], idx[j])])
    }

    /// `Ω = (I − B)ᵀ K (I − B)`.
    pub fn precision(&self) -> DMatrix<f64> {
        let ib = DMatrix::identity(self.p(), self.p()) - &self.b;
        ib.transpose() * &self.k * ib
    }

    /// `Ω⁻¹`.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        self.precision()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::FactorizationFailure("precision is not PD".into()))
    }

    /// The graph encoded by the nonzero pattern of `B` and `K`.
    pub fn graph(&self) -> ChainGraph {
        let p = self.p();
        let mut edges = Vec::new();
        for v in 0..p {
            for u in 0..p {
                if self.b[(v, u)] != 0.0 {
                    edges.push(Edge::directed(u, v));
                }
                if u < v && self.k[(u, v)] != 0.0 {
                    edges.push(Edge::undirected(u, v));
                }
            }
        }
        ChainGraph::new(self.layering.clone(), edges).expect("structure validated on construction")
    }

    /// Node-wise regression coefficients `α_v = −K_{C_v,v} / κ_vv`.
    pub fn alpha(&self, v: usize, w: usize) -> f64 {
        -self.k[(w, v)] / self.k[(v, v)]
    }

    /// `log N(y; 0, Ω⁻¹)`, computed from a factorization of `Ω`.
    pub fn joint_log_density(&self, y: &DVector<f64>) -> Result<f64> {
        let omega = self.precision();
        let chol = omega
            .clone()
            .cholesky()
            .ok_or_else(|| Error::FactorizationFailure("precision is not PD".into()))?;
        let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        let quad = (y.transpose() * &omega * y)[(0, 0)];
        Ok(-0.5 * self.p() as f64 * LN_2PI + 0.5 * log_det - 0.5 * quad)
    }

    /// `Σ_τ log N(y_τ; B_{τ,·} y, K_τ⁻¹)`, the layer-recursive factorization.
    pub fn factorized_log_density(&self, y: &DVector<f64>) -> Result<f64> {
        let by = &self.b * y;
        let mut total = 0.0;
        for t in 0..self.layering.q() {
            let idx = self.layering.layer(t);
            let kt = self.layer_precision(t);
            let chol = kt
                .clone()
                .cholesky()
                .ok_or_else(|| Error::FactorizationFailure(format!("layer {} block", t + 1)))?;
            let r = DVector::from_iterator(idx.len(), idx.iter().map(|&v| y[v] - by[v]));
            let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
            let quad = (r.transpose() * &kt * &r)[(0, 0)];
            total += -0.5 * idx.len() as f64 * LN_2PI + 0.5 * log_det - 0.5 * quad;
        }
        Ok(total)
    }

    /// Partial correlation of `Y_a, Y_b` given `Y_given`, from the exact
    /// marginal covariance.
    pub fn partial_correlation(&self, statement: &Independence) -> Result<f64> {
        let sigma = self.covariance()?;
        let mut idx = vec![statement.a, statement.b];
        idx.extend(&statement.given);
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| sigma[(idx[i], idx[j])]);
        let prec = sub
            .cholesky()
            .ok_or_else(|| Error::FactorizationFailure("marginal covariance".into()))?
            .inverse();
        Ok(-prec[(0, 1)] / (prec[(0, 0)] * prec[(1, 1)]).sqrt())
    }
}

fn signed_magnitude<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> f64 {
    let m = rng.random_range(cfg.magnitude_low..cfg.magnitude_high);
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

/// Draws `B` and `K` on the support of `graph`.
///
/// Nonzero entries are uniform on `(−high, −low) ∪ (low, high)`; each
/// diagonal entry of `K` is the absolute sum of its off-diagonal column
/// plus `diag_pad`, which makes `K` strictly diagonally dominant.
pub fn sample_parameters<R: Rng + ?Sized>(
    graph: &ChainGraph,
    cfg: &GenConfig,
    rng: &mut R,
) -> Result<MlggmParameters> {
    cfg.validate()?;
    let p = graph.p();
    let mut b = DMatrix::zeros(p, p);
    let mut k = DMatrix::zeros(p, p);
    for &e in graph.edges() {
        match e {
            Edge::Directed { from, to } => b[(to, from)] = signed_magnitude(cfg, rng),
            Edge::Undirected(u, v) => {
                let x = signed_magnitude(cfg, rng);
                k[(u, v)] = x;
                k[(v, u)] = x;
            }
        }
    }
    for v in 0..p {
        k[(v, v)] = k.column(v).iter().map(|x| x.abs()).sum::<f64>() + cfg.diag_pad;
    }
    MlggmParameters::new(graph.layering().clone(), b, k)
}

/// `n` rows of residuals `ε_τ ~ N(0, K_τ⁻¹)`, layer by layer within each row.
pub fn sample_noise<R: Rng + ?Sized>(params: &MlggmParameters, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let layering = params.layering();
    let factors = (0..layering.q())
        .map(|t| {
            params
                .layer_precision(t)
                .cholesky()
                .map(|c| c.l())
                .ok_or_else(|| Error::FactorizationFailure(format!("K block of layer {} is not PD", t + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut eps = DMatrix::zeros(n, params.p());
    for row in 0..n {
        for (t, l) in factors.iter().enumerate() {
            let idx = layering.layer(t);
            let z = DVector::from_iterator(idx.len(), (0..idx.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
            // K_τ = L Lᵀ, so L⁻ᵀ z has covariance K_τ⁻¹.
            let e = l.tr_solve_lower_triangular(&z).expect("nonsingular Cholesky factor");
            for (i, &v) in idx.iter().enumerate() {
                eps[(row, v)] = e[i];
            }
        }
    }
    Ok(eps)
}

/// `Y_τ = B_{τ,·} Y + ε_τ`, layer by layer, for every row of `noise`.
pub fn propagate(params: &MlggmParameters, noise: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if noise.ncols() != params.p() {
        return Err(Error::DimensionMismatch(format!("noise has {} columns, p = {}", noise.ncols(), params.p())));
    }
    let layering = params.layering();
    let mut y = noise.clone();
    for row in 0..y.nrows() {
        for idx in layering.layers() {
            for &v in idx {
                let mean: f64 = (0..idx[0]).map(|u| params.b[(v, u)] * y[(row, u)]).sum();
                y[(row, v)] += mean;
            }
        }
    }
    Ok(y)
}

/// `n` draws from `N(0, Ω⁻¹)` by ancestral sampling through the layers.
pub fn sample_values<R: Rng + ?Sized>(params: &MlggmParameters, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    propagate(params, &sample_noise(params, n, rng)?)
}

pub fn sample_data<R: Rng + ?Sized>(params: &MlggmParameters, n: usize, rng: &mut R) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::ConfigInvalid("n must be at least 1".into()));
    }
    Dataset::with_default_names(params.layering().clone(), sample_values(params, n, rng)?)
}
