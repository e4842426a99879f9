//! Per-layer sufficient statistics for the node-wise working model.
//!
//! For a layer `τ` with `m` vertices and candidate parents `P` (`r`
//! columns), vertex `i` is modelled as
//!
//! ```text
//! y_i = P b_i + Σ_{j≠i} α_ij (x_j − P b_j) + e_i,   e_i ~ N(0, 1/κ_i)
//! ```
//!
//! where `x_j = y_j` when fitting data. Keeping the within-layer covariates
//! `x` separate from the responses `y` lets the same kernels run on a
//! fixed design, which is how the sampler is checked against its prior.
//! Everything the sampler needs is an inner product between these
//! columns, so only Gram blocks are stored and the per-sweep cost does not
//! depend on `n`.

use nalgebra::DMatrix;

use super::prior::PriorConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::Edge;

#[derive(Clone, Debug)]
pub struct LayerProblem {
    pub(crate) layer: usize,
    pub(crate) vertices: Vec<usize>,
    pub(crate) parents: Vec<usize>,
    pub(crate) n: usize,
    /// `y_i·y_j`, m×m
    pub(crate) syy: Vec<f64>,
    /// `x_i·x_j`, m×m
    pub(crate) sxx: Vec<f64>,
    /// `x_j·y_i` at `[j*m + i]`
    pub(crate) sxy: Vec<f64>,
    /// `Pᵀy_i` at `[i*r ..]`
    pub(crate) spy: Vec<f64>,
    /// `Pᵀx_j` at `[j*r ..]`
    pub(crate) spx: Vec<f64>,
    /// `PᵀP`, r×r
    pub(crate) spp: Vec<f64>,
    pub(crate) hyper: LayerHyper,
}

/// Hyperparameters resolved for one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerHyper {
    pub lambda: f64,
    pub delta: f64,
    pub c2: f64,
    /// Prior log-odds of `γ_ij`, m×r.
    pub dir_log_odds: Vec<f64>,
    /// Prior log-odds of `η_ij`, m×m (symmetric).
    pub undir_log_odds: Vec<f64>,
}

impl LayerHyper {
    /// Shape of the gamma prior on `κ_ii`: `(δ + m − 1) / 2`.
    pub fn kappa_shape(&self, m: usize) -> f64 {
        (self.delta + m as f64 - 1.0) / 2.0
    }

    /// Rate of the gamma prior on `κ_ii`: `λ / 2`.
    pub fn kappa_rate(&self) -> f64 {
        self.lambda / 2.0
    }
}

fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

impl LayerProblem {
    /// Statistics for layer `k` of a (centered) dataset from its Gram
    /// matrix `YᵀY`.
    pub fn from_gram(gram: &DMatrix<f64>, n: usize, layering: &crate::graph::Layering, k: usize, prior: &PriorConfig) -> Result<Self> {
        if gram.shape() != (layering.p(), layering.p()) {
            return Err(Error::DimensionMismatch("Gram matrix does not match layering".into()));
        }
        let vertices = layering.layer(k).to_vec();
        let parents = layering.cumulative(k)?;
        let (m, r) = (vertices.len(), parents.len());
        let g = |a: usize, b: usize| gram[(a, b)];
        let syy: Vec<f64> = (0..m * m).map(|t| g(vertices[t / m], vertices[t % m])).collect();
        let spy: Vec<f64> = (0..m * r).map(|t| g(parents[t % r], vertices[t / r])).collect();
        let spp: Vec<f64> = (0..r * r).map(|t| g(parents[t / r], parents[t % r])).collect();
        let hyper = prior.layer_hyper(k, &vertices, &parents)?;
        Ok(Self {
            layer: k,
            n,
            sxx: syy.clone(),
            sxy: syy.clone(),
            spx: spy.clone(),
            syy,
            spy,
            spp,
            vertices,
            parents,
            hyper,
        })
    }

    pub fn from_dataset(data: &Dataset, k: usize, prior: &PriorConfig) -> Result<Self> {
        Self::from_gram(&data.gram(), data.n(), data.layering(), k, prior)
    }

    /// Statistics for explicit response, within-layer covariate and parent
    /// columns (all with `n` rows). Vertex and parent labels are local.
    pub fn from_columns(
        responses: &DMatrix<f64>,
        covariates: &DMatrix<f64>,
        parents: &DMatrix<f64>,
        hyper: LayerHyper,
    ) -> Result<Self> {
        let (n, m) = responses.shape();
        let r = parents.ncols();
        if covariates.shape() != (n, m) || parents.nrows() != n {
            return Err(Error::DimensionMismatch("column blocks must share n and m".into()));
        }
        if hyper.dir_log_odds.len() != m * r || hyper.undir_log_odds.len() != m * m {
            return Err(Error::DimensionMismatch("hyperparameter tables do not match m, r".into()));
        }
        let dot = |a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize| a.column(i).dot(&b.column(j));
        Ok(Self {
            layer: 0,
            vertices: (0..m).collect(),
            parents: (0..r).collect(),
            n,
            syy: (0..m * m).map(|t| dot(responses, t / m, responses, t % m)).collect(),
            sxx: (0..m * m).map(|t| dot(covariates, t / m, covariates, t % m)).collect(),
            sxy: (0..m * m).map(|t| dot(covariates, t / m, responses, t % m)).collect(),
            spy: (0..m * r).map(|t| dot(parents, t % r, responses, t / r)).collect(),
            spx: (0..m * r).map(|t| dot(parents, t % r, covariates, t / r)).collect(),
            spp: (0..r * r).map(|t| dot(parents, t / r, parents, t % r)).collect(),
            hyper,
        })
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    /// Global labels of the layer's vertices.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Global labels of the candidate parents.
    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn m(&self) -> usize {
        self.vertices.len()
    }

    pub fn r(&self) -> usize {
        self.parents.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hyper(&self) -> &LayerHyper {
        &self.hyper
    }

    pub(crate) fn spy_row(&self, i: usize) -> &[f64] {
        let r = self.r();
        &self.spy[i * r..(i + 1) * r]
    }

    pub(crate) fn spx_row(&self, j: usize) -> &[f64] {
        let r = self.r();
        &self.spx[j * r..(j + 1) * r]
    }

    pub(crate) fn spp_entry(&self, a: usize, b: usize) -> f64 {
        self.spp[a * self.r() + b]
    }

    /// Candidate edge for `γ_ij` (parent `a` of local vertex `i`).
    pub fn directed_edge(&self, i: usize, a: usize) -> Edge {
        Edge::directed(self.parents[a], self.vertices[i])
    }

    pub fn undirected_edge(&self, i: usize, j: usize) -> Edge {
        Edge::undirected(self.vertices[i], self.vertices[j])
    }
}

impl PriorConfig {
    pub(crate) fn layer_hyper(&self, k: usize, vertices: &[usize], parents: &[usize]) -> Result<LayerHyper> {
        self.validate()?;
        let (lambda, delta) = self.layer_lambda_delta(k);
        let c2 = self.c2.unwrap_or(1.0 / lambda);
        let (m, r) = (vertices.len(), parents.len());
        let mut dir_log_odds = vec![logit(self.p_dir); m * r];
        let mut undir_log_odds = vec![logit(self.q_undir); m * m];
        for &(e, prob) in &self.edge_prob {
            match e {
                Edge::Directed { from, to } => {
                    if let (Some(i), Some(a)) = (
                        vertices.iter().position(|&v| v == to),
                        parents.iter().position(|&u| u == from),
                    ) {
                        dir_log_odds[i * r + a] = logit(prob);
                    }
                }
                Edge::Undirected(u, v) => {
                    if let (Some(i), Some(j)) =
                        (vertices.iter().position(|&x| x == u), vertices.iter().position(|&x| x == v))
                    {
                        undir_log_odds[i * m + j] = logit(prob);
                        undir_log_odds[j * m + i] = logit(prob);
                    }
                }
            }
        }
        Ok(LayerHyper { lambda, delta, c2, dir_log_odds, undir_log_odds })
    }
}
