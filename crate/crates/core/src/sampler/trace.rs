//! Retained draws.
//!
//! Every candidate edge owns two slots, `2·e` and `2·e + 1`. For an
//! undirected edge `u−v` (`u < v`) slot `2·e` holds `η_uv`/`α_uv` from the
//! regression of `u` and slot `2·e + 1` holds `η_vu`/`α_vu`; under BANS the
//! two indicators are always equal. A directed edge only uses slot `2·e`.
//! Per iteration the active slots are stored sparsely; per slot the
//! inclusion count, the count of positive coefficients and the coefficient
//! sum are accumulated.

use serde::{Deserialize, Serialize};

use super::state::LayerState;
use super::{SamplerMode, Symmetrize};
use crate::error::{Error, Result};
use crate::graph::{Edge, Layering};

/// Position of the candidate edge on labels `u < v` in
/// [`Layering::candidate_edges`].
pub fn candidate_index(p: usize, u: usize, v: usize) -> usize {
    debug_assert!(u < v && v < p);
    u * p - u * (u + 1) / 2 + (v - u - 1)
}

#[derive(Clone, Debug, Default)]
struct Draws {
    offsets: Vec<u32>,
    slots: Vec<u32>,
    edge_count: Vec<u32>,
    log_lik: Vec<f64>,
    violations: Vec<u32>,
    counts: Vec<u32>,
    positive: Vec<u32>,
    coef_sum: Vec<f64>,
}

impl Draws {
    fn with_slots(n: usize) -> Self {
        Self { offsets: vec![0], counts: vec![0; n], positive: vec![0; n], coef_sum: vec![0.0; n], ..Self::default() }
    }

    fn retained(&self) -> usize {
        self.edge_count.len()
    }
}

/// Draws from one layer, with slots indexed by the layer's own edge list.
#[derive(Clone, Debug)]
pub struct LayerTrace {
    m: usize,
    r: usize,
    edges: Vec<Edge>,
    draws: Draws,
}

impl LayerTrace {
    /// `vertices` and `parents` are global labels.
    pub fn new(vertices: &[usize], parents: &[usize]) -> Self {
        let (m, r) = (vertices.len(), parents.len());
        let mut edges = Vec::with_capacity(m * (m - 1) / 2 + m * r);
        for i in 0..m {
            for j in i + 1..m {
                edges.push(Edge::undirected(vertices[i], vertices[j]));
            }
        }
        for &v in vertices {
            for &w in parents {
                edges.push(Edge::directed(w, v));
            }
        }
        let draws = Draws::with_slots(2 * edges.len());
        Self { m, r, edges, draws }
    }

    fn pair_slot(&self, i: usize, j: usize) -> usize {
        let (a, b, half) = if i < j { (i, j, 0) } else { (j, i, 1) };
        2 * candidate_index(self.m, a, b) + half
    }

    fn directed_slot(&self, i: usize, a: usize) -> usize {
        2 * (self.m * (self.m - 1) / 2 + i * self.r + a)
    }

    pub fn record(&mut self, state: &LayerState, log_lik: f64, violations: usize) {
        let mut active = Vec::new();
        let mut edges = 0;
        for (i, row) in state.rows().iter().enumerate() {
            for j in (0..self.m).filter(|&j| j != i && row.eta[j]) {
                active.push((self.pair_slot(i, j), row.alpha[j]));
                if i < j && state.row(j).eta[i] {
                    edges += 1;
                }
            }
            for a in (0..self.r).filter(|&a| row.gamma[a]) {
                active.push((self.directed_slot(i, a), row.b[a]));
                edges += 1;
            }
        }
        active.sort_unstable_by_key(|&(s, _)| s);
        let d = &mut self.draws;
        for (slot, coef) in active {
            d.slots.push(slot as u32);
            d.counts[slot] += 1;
            d.positive[slot] += u32::from(coef > 0.0);
            d.coef_sum[slot] += coef;
        }
        d.offsets.push(d.slots.len() as u32);
        d.edge_count.push(edges);
        d.log_lik.push(log_lik);
        d.violations.push(violations as u32);
    }

    pub fn retained(&self) -> usize {
        self.draws.retained()
    }
}

/// Retained draws of a whole chain over the candidate universe of a
/// layering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    mode: SamplerMode,
    p: usize,
    edges: Vec<Edge>,
    offsets: Vec<u32>,
    slots: Vec<u32>,
    edge_count: Vec<u32>,
    log_lik: Vec<f64>,
    violations: Vec<u32>,
    counts: Vec<u32>,
    positive: Vec<u32>,
    coef_sum: Vec<f64>,
}

impl ChainTrace {
    /// Combines per-layer traces (in layer order) over the same iterations.
    pub fn merge(layering: &Layering, mode: SamplerMode, layers: &[LayerTrace]) -> Result<Self> {
        let p = layering.p();
        let edges = layering.candidate_edges();
        let retained = layers.first().map_or(0, LayerTrace::retained);
        if retained == 0 {
            return Err(Error::EmptyTrace);
        }
        if layers.iter().any(|l| l.retained() != retained) {
            return Err(Error::DimensionMismatch("layer traces retained different counts".into()));
        }
        let n = 2 * edges.len();
        let mut out = Self {
            mode,
            p,
            offsets: vec![0],
            slots: Vec::new(),
            edge_count: vec![0; retained],
            log_lik: vec![0.0; retained],
            violations: vec![0; retained],
            counts: vec![0; n],
            positive: vec![0; n],
            coef_sum: vec![0.0; n],
            edges,
        };
        let maps: Vec<Vec<u32>> = layers
            .iter()
            .map(|l| {
                l.edges
                    .iter()
                    .flat_map(|e| {
                        let (u, v) = e.endpoints();
                        let g = 2 * candidate_index(p, u, v) as u32;
                        [g, g + 1]
                    })
                    .collect()
            })
            .collect();
        for (l, map) in layers.iter().zip(&maps) {
            let d = &l.draws;
            for (local, &global) in map.iter().enumerate() {
                let g = global as usize;
                out.counts[g] += d.counts[local];
                out.positive[g] += d.positive[local];
                out.coef_sum[g] += d.coef_sum[local];
            }
        }
        for t in 0..retained {
            let start = out.slots.len();
            for (l, map) in layers.iter().zip(&maps) {
                let d = &l.draws;
                let range = d.offsets[t] as usize..d.offsets[t + 1] as usize;
                out.slots.extend(d.slots[range].iter().map(|&s| map[s as usize]));
                out.edge_count[t] += d.edge_count[t];
                out.log_lik[t] += d.log_lik[t];
                out.violations[t] += d.violations[t];
            }
            out.slots[start..].sort_unstable();
            out.offsets.push(out.slots.len() as u32);
        }
        Ok(out)
    }

    pub fn mode(&self) -> SamplerMode {
        self.mode
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Candidate universe, in slot order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn retained(&self) -> usize {
        self.edge_count.len()
    }

    pub fn edge_index(&self, e: Edge) -> Option<usize> {
        let (u, v) = e.endpoints();
        if u >= v || v >= self.p {
            return None;
        }
        let idx = candidate_index(self.p, u, v);
        (self.edges[idx] == e).then_some(idx)
    }

    /// Inclusion frequency of each half-slot.
    pub fn slot_frequency(&self, slot: usize) -> f64 {
        self.counts[slot] as f64 / self.retained() as f64
    }

    /// Inclusion frequency of edge `e`, combining the two halves of an
    /// undirected edge as `sym` prescribes (they coincide under BANS).
    pub fn inclusion_frequency(&self, e: usize, sym: Symmetrize) -> f64 {
        let a = self.slot_frequency(2 * e);
        match self.edges[e] {
            Edge::Directed { .. } => a,
            Edge::Undirected(..) => {
                let b = self.slot_frequency(2 * e + 1);
                match sym {
                    Symmetrize::And => a.min(b),
                    Symmetrize::Or => a.max(b),
                }
            }
        }
    }

    /// Fraction of retained draws with a positive coefficient; the two
    /// halves of an undirected edge are averaged.
    pub fn positive_frequency(&self, e: usize) -> f64 {
        let m = self.retained() as f64;
        match self.edges[e] {
            Edge::Directed { .. } => self.positive[2 * e] as f64 / m,
            Edge::Undirected(..) => (self.positive[2 * e] + self.positive[2 * e + 1]) as f64 / (2.0 * m),
        }
    }

    /// Mean coefficient over retained draws (zero when excluded).
    pub fn mean_coefficient(&self, e: usize) -> f64 {
        let m = self.retained() as f64;
        match self.edges[e] {
            Edge::Directed { .. } => self.coef_sum[2 * e] / m,
            Edge::Undirected(..) => (self.coef_sum[2 * e] + self.coef_sum[2 * e + 1]) / (2.0 * m),
        }
    }

    /// Active slots of retained draw `t`.
    pub fn active_slots(&self, t: usize) -> &[u32] {
        &self.slots[self.offsets[t] as usize..self.offsets[t + 1] as usize]
    }

    pub fn edge_count_trace(&self) -> &[u32] {
        &self.edge_count
    }

    pub fn log_likelihood_trace(&self) -> &[f64] {
        &self.log_lik
    }

    /// Invariant violations summed over all retained draws.
    pub fn violations(&self) -> u64 {
        self.violations.iter().map(|&v| v as u64).sum()
    }

    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            mode: self.mode,
            retained: self.retained(),
            violations: self.violations(),
            edge_count: self.edge_count.clone(),
            log_likelihood: self.log_lik.clone(),
        }
    }
}

/// Convergence diagnostics written next to the inclusion probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub mode: SamplerMode,
    pub retained: usize,
    pub violations: u64,
    pub edge_count: Vec<u32>,
    pub log_likelihood: Vec<f64>,
}
