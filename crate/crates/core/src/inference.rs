//! Posterior summaries: inclusion probabilities, Bayesian FDR selection,
//! sign calls and network summaries.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{component, Edge, Layering};
use crate::sampler::{ChainTrace, SignPosterior, Symmetrize};

/// Posterior inclusion probability `g` of every candidate edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeProbabilities {
    pub p: usize,
    pub edges: Vec<Edge>,
    pub g: Vec<f64>,
}

impl EdgeProbabilities {
    pub fn new(p: usize, edges: Vec<Edge>, g: Vec<f64>) -> Result<Self> {
        if edges.len() != g.len() {
            return Err(Error::DimensionMismatch(format!("{} edges, {} probabilities", edges.len(), g.len())));
        }
        if let Some(x) = g.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::ConfigInvalid(format!("inclusion probability {x} outside [0, 1]")));
        }
        Ok(Self { p, edges, g })
    }

    pub fn get(&self, e: Edge) -> Option<f64> {
        self.edges.iter().position(|&x| x == e).map(|i| self.g[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Edge, f64)> + '_ {
        self.edges.iter().copied().zip(self.g.iter().copied())
    }
}

/// Retained-draw inclusion frequencies, with BANS-parallel halves
/// combined by the trace's own rule.
pub fn ppi(trace: &ChainTrace) -> Result<EdgeProbabilities> {
    ppi_with(trace, trace.mode().symmetrize())
}

pub fn ppi_with(trace: &ChainTrace, sym: Symmetrize) -> Result<EdgeProbabilities> {
    if trace.retained() == 0 {
        return Err(Error::EmptyTrace);
    }
    let g = (0..trace.edges().len()).map(|e| trace.inclusion_frequency(e, sym)).collect();
    EdgeProbabilities::new(trace.p(), trace.edges().to_vec(), g)
}

/// Edges discovered at a target FDR.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub alpha: f64,
    /// Threshold `φ`: the smallest selected probability, or 1 when nothing
    /// is selected.
    pub phi: f64,
    pub edges: Vec<Edge>,
    pub g: Vec<f64>,
    /// Mean of `1 − g` over the selected edges (0 when empty).
    pub expected_fdr: f64,
}

impl Selection {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, e: Edge) -> bool {
        self.edges.contains(&e)
    }
}

/// Indices sorted by `g` descending, then by edge.
fn ranking(probs: &EdgeProbabilities) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..probs.g.len()).collect();
    idx.sort_by(|&a, &b| probs.g[b].total_cmp(&probs.g[a]).then(probs.edges[a].cmp(&probs.edges[b])));
    idx
}

/// Bayesian FDR selection.
///
/// With `g` sorted in decreasing order, the discovery set is the longest
/// prefix whose mean of `1 − g` is below `alpha`. Prefixes may only end at
/// a change in `g`, so edges tied at the threshold are all in or all out.
pub fn fdr_select(probs: &EdgeProbabilities, alpha: f64) -> Result<Selection> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::ConfigInvalid(format!("FDR level {alpha} outside (0, 1)")));
    }
    let order = ranking(probs);
    let mut best = 0;
    let mut sum = 0.0;
    for (k, &i) in order.iter().enumerate() {
        sum += 1.0 - probs.g[i];
        let boundary = k + 1 == order.len() || probs.g[order[k + 1]] < probs.g[i];
        if boundary && sum / ((k + 1) as f64) < alpha {
            best = k + 1;
        }
    }
    let chosen = &order[..best];
    let g: Vec<f64> = chosen.iter().map(|&i| probs.g[i]).collect();
    Ok(Selection {
        alpha,
        phi: g.last().copied().unwrap_or(1.0),
        edges: chosen.iter().map(|&i| probs.edges[i]).collect(),
        expected_fdr: if g.is_empty() { 0.0 } else { g.iter().map(|x| 1.0 - x).sum::<f64>() / g.len() as f64 },
        g,
    })
}

/// Edges with `g > phi` (the median probability model at `phi = 0.5`).
pub fn threshold_select(probs: &EdgeProbabilities, phi: f64) -> Vec<Edge> {
    probs.iter().filter(|&(_, g)| g > phi).map(|(e, _)| e).collect()
}

/// `Σ (1 − g)·1[g > φ] / Σ 1[g > φ]`.
pub fn expected_fdr(g: &[f64], phi: f64) -> Result<f64> {
    let above: Vec<f64> = g.iter().copied().filter(|&x| x > phi).collect();
    if above.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(above.iter().map(|x| 1.0 - x).sum::<f64>() / above.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Positive => "+",
            Sign::Negative => "-",
        }
    }
}

/// Positive iff `P(coefficient > 0) > xi`.
pub fn call_sign(prob_positive: f64, xi: f64) -> Sign {
    if prob_positive > xi {
        Sign::Positive
    } else {
        Sign::Negative
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedEdge {
    pub edge: Edge,
    pub g: f64,
    pub prob_positive: f64,
    pub sign: Sign,
}

/// Labels every selected edge with a sign.
pub fn call_signs(selection: &Selection, signs: &SignPosterior, xi: f64) -> Result<Vec<SignedEdge>> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::ConfigInvalid(format!("sign cutoff {xi} outside (0, 1)")));
    }
    selection
        .edges
        .iter()
        .zip(&selection.g)
        .map(|(&edge, &g)| {
            let prob_positive =
                signs.get(edge).ok_or_else(|| Error::StructureInconsistent(format!("no sign draw for {edge}")))?;
            Ok(SignedEdge { edge, g, prob_positive, sign: call_sign(prob_positive, xi) })
        })
        .collect()
}

/// Selection, signs and the threshold, in one record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub probabilities: EdgeProbabilities,
    pub selection: Selection,
    pub xi: f64,
    pub signed: Vec<SignedEdge>,
}

/// `W_i = Σ_j g_ij` over the given edges touching `i`.
pub fn weighted_degree(p: usize, edges: impl IntoIterator<Item = (Edge, f64)>) -> Vec<f64> {
    let mut w = vec![0.0; p];
    for (e, g) in edges {
        let (a, b) = e.endpoints();
        w[a] += g;
        w[b] += g;
    }
    w
}

/// Weighted degrees over the selected edges only.
pub fn selected_weighted_degree(p: usize, selection: &Selection) -> Vec<f64> {
    weighted_degree(p, selection.edges.iter().copied().zip(selection.g.iter().copied()))
}

/// Vertices joined to `v` by a path of edges of any kind, `v` included.
pub fn connected_component(p: usize, edges: &[Edge], v: usize) -> BTreeSet<usize> {
    component(p, edges.iter().copied(), v)
}

/// A within-layer block or an ordered pair of layers (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NetworkBlock {
    Within(usize),
    Between(usize, usize),
}

impl NetworkBlock {
    /// Number of candidate edges in the block.
    pub fn possible(self, layering: &Layering) -> usize {
        let sizes = layering.sizes();
        match self {
            NetworkBlock::Within(k) => sizes[k] * (sizes[k] - 1) / 2,
            NetworkBlock::Between(a, b) => sizes[a] * sizes[b],
        }
    }

    pub fn all(layering: &Layering) -> Vec<Self> {
        let q = layering.q();
        let mut out: Vec<Self> = (0..q).map(NetworkBlock::Within).collect();
        for a in 0..q {
            for b in a + 1..q {
                out.push(NetworkBlock::Between(a, b));
            }
        }
        out
    }

    fn of(layering: &Layering, e: Edge) -> Self {
        let (u, v) = e.endpoints();
        let (a, b) = (layering.layer_of(u), layering.layer_of(v));
        if a == b {
            NetworkBlock::Within(a)
        } else {
            NetworkBlock::Between(a.min(b), a.max(b))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityScore {
    pub block: NetworkBlock,
    pub observed: usize,
    pub possible: usize,
    /// `observed / possible`; 0 for a block without candidates.
    pub score: f64,
}

/// Observed over possible edges, per block.
pub fn connectivity_scores(layering: &Layering, edges: &[Edge]) -> Vec<ConnectivityScore> {
    let mut observed: BTreeMap<NetworkBlock, usize> = BTreeMap::new();
    for &e in edges.iter().collect::<BTreeSet<_>>() {
        *observed.entry(NetworkBlock::of(layering, e)).or_default() += 1;
    }
    NetworkBlock::all(layering)
        .into_iter()
        .map(|block| {
            let possible = block.possible(layering);
            let observed = observed.get(&block).copied().unwrap_or(0);
            let score = if possible == 0 { 0.0 } else { observed as f64 / possible as f64 };
            ConnectivityScore { block, observed, possible, score }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectivitySummary {
    pub block: NetworkBlock,
    pub scores: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across runs (0 for a single run).
    pub sd: f64,
}

/// Connectivity scores of several runs over a shared layering.
pub fn connectivity_across_runs(layering: &Layering, runs: &[Vec<Edge>]) -> Vec<ConnectivitySummary> {
    let per_run: Vec<Vec<ConnectivityScore>> = runs.iter().map(|r| connectivity_scores(layering, r)).collect();
    NetworkBlock::all(layering)
        .into_iter()
        .enumerate()
        .map(|(b, block)| {
            let scores: Vec<f64> = per_run.iter().map(|r| r[b].score).collect();
            let n = scores.len() as f64;
            let mean = if scores.is_empty() { 0.0 } else { scores.iter().sum::<f64>() / n };
            let sd = if scores.len() < 2 {
                0.0
            } else {
                (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            };
            ConnectivitySummary { block, scores, mean, sd }
        })
        .collect()
}

/// Maximum number of runs for [`intersection_counts`].
pub const MAX_INTERSECTION_RUNS: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntersectionRow {
    /// Indices of the runs in the subset.
    pub runs: Vec<usize>,
    /// Edges present in exactly these runs.
    pub count: usize,
}

/// Exclusive intersection sizes for every nonempty subset of runs, ordered
/// by subset size and then lexicographically.
pub fn intersection_counts(sets: &[BTreeSet<Edge>]) -> Result<Vec<IntersectionRow>> {
    let k = sets.len();
    if k == 0 || k > MAX_INTERSECTION_RUNS {
        return Err(Error::ConfigInvalid(format!("intersection needs 1 to {MAX_INTERSECTION_RUNS} runs, got {k}")));
    }
    let mut by_mask: BTreeMap<u32, usize> = BTreeMap::new();
    let union: BTreeSet<Edge> = sets.iter().flatten().copied().collect();
    for e in union {
        let mask = sets.iter().enumerate().filter(|(_, s)| s.contains(&e)).fold(0u32, |m, (i, _)| m | 1 << i);
        *by_mask.entry(mask).or_default() += 1;
    }
    let mut rows: Vec<IntersectionRow> = (1u32..1 << k)
        .map(|mask| IntersectionRow {
            runs: (0..k).filter(|&i| mask >> i & 1 == 1).collect(),
            count: by_mask.get(&mask).copied().unwrap_or(0),
        })
        .collect();
    rows.sort_by(|a, b| a.runs.len().cmp(&b.runs.len()).then_with(|| a.runs.cmp(&b.runs)));
    Ok(rows)
}
