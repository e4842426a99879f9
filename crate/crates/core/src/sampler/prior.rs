use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::problem::LayerHyper;
use crate::error::{Error, Result};
use crate::graph::Edge;

/// Spike-and-slab prior.
///
/// ```text
/// b_vw | γ_vw, κ_vv ~ γ_vw N(0, c²/κ_vv) + (1 − γ_vw) δ₀
/// α_vu | η_vu, κ_vv ~ η_vu N(0, 1/(λ_τ κ_vv)) + (1 − η_vu) δ₀
/// κ_vv ~ Gamma((δ_τ + |τ| − 1)/2, rate λ_τ/2)
/// P(γ_vw = 1) = p_vw,  P(η_vu = 1) = q_vu
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub lambda: f64,
    pub delta: f64,
    /// Slab variance scale for directed coefficients; `None` means `1/λ_τ`.
    pub c2: Option<f64>,
    pub p_dir: f64,
    pub q_undir: f64,
    /// `(λ_τ, δ_τ)` for individual layers (0-based), overriding the defaults.
    #[serde(default)]
    pub per_layer: BTreeMap<usize, (f64, f64)>,
    /// Edge-specific prior inclusion probabilities.
    #[serde(default)]
    pub edge_prob: Vec<(Edge, f64)>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            lambda: 2.0,
            delta: 2.0,
            c2: None,
            p_dir: 0.1,
            q_undir: 0.1,
            per_layer: BTreeMap::new(),
            edge_prob: Vec::new(),
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        let prob = |x: f64| x > 0.0 && x < 1.0;
        let layers = self.per_layer.values().flat_map(|&(l, d)| [l, d]);
        if !pos(self.lambda) || !pos(self.delta) || !layers.into_iter().all(pos) {
            return Err(Error::ConfigInvalid("lambda and delta must be positive".into()));
        }
        if self.c2.is_some_and(|c| !pos(c)) {
            return Err(Error::ConfigInvalid("c2 must be positive".into()));
        }
        if !prob(self.p_dir) || !prob(self.q_undir) || !self.edge_prob.iter().all(|&(_, p)| prob(p)) {
            return Err(Error::ConfigInvalid("prior inclusion probabilities must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn layer_lambda_delta(&self, k: usize) -> (f64, f64) {
        self.per_layer.get(&k).copied().unwrap_or((self.lambda, self.delta))
    }
}

impl LayerHyper {
    /// Uniform prior tables for a layer with `m` vertices and `r` parents.
    pub fn uniform(lambda: f64, delta: f64, c2: f64, p_dir: f64, q_undir: f64, m: usize, r: usize) -> Self {
        let logit = |p: f64| p.ln() - (-p).ln_1p();
        Self {
            lambda,
            delta,
            c2,
            dir_log_odds: vec![logit(p_dir); m * r],
            undir_log_odds: vec![logit(q_undir); m * m],
        }
    }
}
