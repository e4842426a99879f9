//! Layered chain graphs.
//!
//! Vertices are indexed `0..p` internally and printed 1-based. A
//! [`Layering`] is an ordered partition of the vertices into layers
//! `τ₁ < … < τ_q` where every vertex of an earlier layer carries a smaller
//! label than every vertex of a later layer. Edges between layers are
//! directed from the earlier layer to the later one; edges inside a layer
//! are undirected.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered partition of `0..p` into layers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct Layering {
    layers: Vec<Vec<usize>>,
    layer_of: Vec<usize>,
}

impl Layering {
    /// Validates a partition. Vertices inside each layer are sorted; the
    /// partition must cover `0..p` exactly once and respect label order.
    pub fn new(mut layers: Vec<Vec<usize>>) -> Result<Self> {
        let p: usize = layers.iter().map(Vec::len).sum();
        let mut layer_of = vec![usize::MAX; p];
        for (k, layer) in layers.iter_mut().enumerate() {
            if layer.is_empty() {
                return Err(Error::EmptyLayer { layer: k + 1 });
            }
            layer.sort_unstable();
            for &v in layer.iter() {
                if v >= p {
                    return Err(Error::VertexOutOfRange { vertex: v + 1, p });
                }
                if layer_of[v] != usize::MAX {
                    return Err(Error::LayerOverlap { vertex: v + 1 });
                }
                layer_of[v] = k;
            }
        }
        if let Some(v) = layer_of.iter().position(|&k| k == usize::MAX) {
            return Err(Error::UncoveredVertex { vertex: v + 1 });
        }
        for v in 1..p {
            if layer_of[v] < layer_of[v - 1] {
                return Err(Error::LabelOrderViolation { lower: v, higher: v + 1 });
            }
        }
        Ok(Self { layers, layer_of })
    }

    /// Contiguous layers of the given sizes.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut next = 0;
        let layers = sizes
            .iter()
            .map(|&s| {
                let layer: Vec<usize> = (next..next + s).collect();
                next += s;
                layer
            })
            .collect();
        Self::new(layers)
    }

    pub fn p(&self) -> usize {
        self.layer_of.len()
    }

    pub fn q(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    /// Vertices of layer `k` (0-based).
    pub fn layer(&self, k: usize) -> &[usize] {
        &self.layers[k]
    }

    /// 0-based layer index of `v`.
    pub fn layer_of(&self, v: usize) -> usize {
        self.layer_of[v]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    /// Union of the first `l` layers. `l = 0` gives the empty set.
    pub fn cumulative(&self, l: usize) -> Result<Vec<usize>> {
        if l > self.q() {
            return Err(Error::IndexOutOfRange { index: l, max: self.q() });
        }
        Ok(self.layers[..l].iter().flatten().copied().collect())
    }

    /// Candidate parents and neighbours of `v`.
    pub fn context(&self, v: usize) -> VertexContext {
        let k = self.layer_of[v];
        VertexContext {
            vertex: v,
            parents: self.layers[..k].iter().flatten().copied().collect(),
            neighbors: self.layers[k].iter().copied().filter(|&u| u != v).collect(),
        }
    }

    /// Whether `e` is permitted by the layer order.
    pub fn permits(&self, e: Edge) -> bool {
        let p = self.p();
        match e {
            Edge::Directed { from, to } => {
                from < p && to < p && self.layer_of[from] < self.layer_of[to]
            }
            Edge::Undirected(u, v) => u < p && v < p && u != v && self.layer_of[u] == self.layer_of[v],
        }
    }

    /// Every edge the model can select: all within-layer pairs and all
    /// earlier-to-later ordered pairs, sorted by `(src, dst)`.
    pub fn candidate_edges(&self) -> Vec<Edge> {
        let p = self.p();
        let mut edges = Vec::with_capacity(p * p.saturating_sub(1) / 2);
        for u in 0..p {
            for v in u + 1..p {
                if self.layer_of[u] == self.layer_of[v] {
                    edges.push(Edge::Undirected(u, v));
                } else {
                    edges.push(Edge::Directed { from: u, to: v });
                }
            }
        }
        edges
    }
}

impl TryFrom<Vec<Vec<usize>>> for Layering {
    type Error = Error;
    fn try_from(layers: Vec<Vec<usize>>) -> Result<Self> {
        Self::new(layers)
    }
}

impl From<Layering> for Vec<Vec<usize>> {
    fn from(l: Layering) -> Self {
        l.layers
    }
}

/// Candidate parent set `P_v` (all vertices of earlier layers) and
/// candidate neighbour set `C_v` (the rest of `v`'s layer).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexContext {
    pub vertex: usize,
    pub parents: Vec<usize>,
    pub neighbors: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Dir,
    Undir,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Dir => "dir",
            EdgeKind::Undir => "undir",
        }
    }
}

/// A directed edge `from → to` or an undirected pair stored with the
/// smaller label first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Edge {
    Directed { from: usize, to: usize },
    Undirected(usize, usize),
}

impl Edge {
    pub fn directed(from: usize, to: usize) -> Self {
        Edge::Directed { from, to }
    }

    pub fn undirected(u: usize, v: usize) -> Self {
        if u <= v {
            Edge::Undirected(u, v)
        } else {
            Edge::Undirected(v, u)
        }
    }

    pub fn kind(self) -> EdgeKind {
        match self {
            Edge::Directed { .. } => EdgeKind::Dir,
            Edge::Undirected(..) => EdgeKind::Undir,
        }
    }

    /// `(src, dst)`; for undirected edges `src < dst`.
    pub fn endpoints(self) -> (usize, usize) {
        match self {
            Edge::Directed { from, to } => (from, to),
            Edge::Undirected(u, v) => (u, v),
        }
    }

    pub fn touches(self, v: usize) -> bool {
        let (a, b) = self.endpoints();
        a == v || b == v
    }
}

impl PartialOrd for Edge {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Edge {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.endpoints(), self.kind()).cmp(&(other.endpoints(), other.kind()))
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Edge::Directed { from, to } => write!(f, "{}->{}", from + 1, to + 1),
            Edge::Undirected(u, v) => write!(f, "{}-{}", u + 1, v + 1),
        }
    }
}

/// Unvalidated description of a chain graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChainGraphSpec {
    pub layers: Vec<Vec<usize>>,
    /// `(from, to)` pairs.
    pub directed: Vec<(usize, usize)>,
    pub undirected: Vec<(usize, usize)>,
}

impl ChainGraphSpec {
    pub fn validate(self) -> Result<ChainGraph> {
        let layering = Layering::new(self.layers)?;
        let edges = self
            .directed
            .into_iter()
            .map(|(a, b)| Edge::directed(a, b))
            .chain(self.undirected.into_iter().map(|(a, b)| Edge::undirected(a, b)));
        ChainGraph::new(layering, edges)
    }
}

/// A validated chain graph over a [`Layering`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainGraph {
    layering: Layering,
    edges: BTreeSet<Edge>,
}

impl ChainGraph {
    pub fn new(layering: Layering, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let p = layering.p();
        let mut set = BTreeSet::new();
        for e in edges {
            let (a, b) = e.endpoints();
            for x in [a, b] {
                if x >= p {
                    return Err(Error::VertexOutOfRange { vertex: x + 1, p });
                }
            }
            if a == b {
                return Err(Error::SelfLoop { vertex: a + 1 });
            }
            match e {
                Edge::Directed { from, to } if layering.layer_of(from) >= layering.layer_of(to) => {
                    return Err(Error::BackwardDirectedEdge { from: from + 1, to: to + 1 });
                }
                Edge::Undirected(u, v) if layering.layer_of(u) != layering.layer_of(v) => {
                    return Err(Error::CrossLayerUndirectedEdge { u: u + 1, v: v + 1 });
                }
                _ => {}
            }
            set.insert(e);
        }
        Ok(Self { layering, edges: set })
    }

    pub fn empty(layering: Layering) -> Self {
        Self { layering, edges: BTreeSet::new() }
    }

    pub fn layering(&self) -> &Layering {
        &self.layering
    }

    pub fn p(&self) -> usize {
        self.layering.p()
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn contains(&self, e: Edge) -> bool {
        self.edges.contains(&e)
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn cumulative(&self, l: usize) -> Result<Vec<usize>> {
        self.layering.cumulative(l)
    }

    /// Conditional independences implied by each missing candidate edge
    /// under the pairwise Markov property:
    ///
    /// * missing `u − v` (same layer `l`): `Y_u ⟂ Y_v | C_l \ {u, v}`
    /// * missing `u → v` (`t(u) < t(v)`): `Y_u ⟂ Y_v | C_{t(v)-1} \ {u}`
    pub fn implied_independencies(&self) -> Vec<Independence> {
        let l = &self.layering;
        l.candidate_edges()
            .into_iter()
            .filter(|e| !self.edges.contains(e))
            .map(|e| {
                let (u, v) = e.endpoints();
                let given = match e {
                    Edge::Undirected(..) => l.layers()[..=l.layer_of(v)]
                        .iter()
                        .flatten()
                        .copied()
                        .filter(|&x| x != u && x != v)
                        .collect(),
                    Edge::Directed { .. } => l.layers()[..l.layer_of(v)]
                        .iter()
                        .flatten()
                        .copied()
                        .filter(|&x| x != u)
                        .collect(),
                };
                Independence { a: u, b: v, given }
            })
            .collect()
    }

    /// Vertices reachable from `v` through edges of either kind,
    /// ignoring direction. Includes `v`.
    pub fn connected_component(&self, v: usize) -> BTreeSet<usize> {
        component(self.p(), self.edges.iter().copied(), v)
    }
}

pub(crate) fn component(p: usize, edges: impl Iterator<Item = Edge>, v: usize) -> BTreeSet<usize> {
    let mut adj = vec![Vec::new(); p];
    for e in edges {
        let (a, b) = e.endpoints();
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = BTreeSet::from([v]);
    let mut stack = vec![v];
    while let Some(x) = stack.pop() {
        for &y in &adj[x] {
            if seen.insert(y) {
                stack.push(y);
            }
        }
    }
    seen
}

/// `Y_a ⟂ Y_b | Y_given`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Independence {
    pub a: usize,
    pub b: usize,
    pub given: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ChainGraphSpec {
        ChainGraphSpec {
            layers: vec![vec![0, 1], vec![2, 3]],
            directed: vec![(0, 2), (1, 3)],
            undirected: vec![(2, 3)],
        }
    }

    #[test]
    fn toy_graph_is_valid() {
        let g = toy().validate().unwrap();
        assert_eq!(g.n_edges(), 3);
        assert!(g.contains(Edge::undirected(3, 2)));
    }

    #[test]
    fn backward_directed_edge_rejected() {
        let mut s = toy();
        s.directed.push((2, 0));
        assert!(matches!(s.validate(), Err(Error::BackwardDirectedEdge { from: 3, to: 1 })));
    }

    #[test]
    fn cross_layer_undirected_rejected() {
        let mut s = toy();
        s.undirected.push((0, 2));
        assert!(matches!(s.validate(), Err(Error::CrossLayerUndirectedEdge { .. })));
    }

    #[test]
    fn within_layer_directed_rejected() {
        let mut s = toy();
        s.directed.push((2, 3));
        assert!(matches!(s.validate(), Err(Error::BackwardDirectedEdge { .. })));
    }

    #[test]
    fn overlapping_layers_rejected() {
        let s = ChainGraphSpec { layers: vec![vec![0, 1], vec![1, 2]], ..Default::default() };
        assert!(matches!(s.validate(), Err(Error::LayerOverlap { vertex: 2 })));
    }

    #[test]
    fn label_order_enforced() {
        let s = ChainGraphSpec { layers: vec![vec![0, 2], vec![1, 3]], ..Default::default() };
        assert!(matches!(s.validate(), Err(Error::LabelOrderViolation { .. })));
    }

    #[test]
    fn non_consecutive_directed_edges_allowed() {
        let s = ChainGraphSpec {
            layers: vec![vec![0], vec![1], vec![2]],
            directed: vec![(0, 2)],
            undirected: vec![],
        };
        assert!(s.validate().is_ok());
    }

    #[test]
    fn cumulatives() {
        let g = toy().validate().unwrap();
        assert_eq!(g.cumulative(0).unwrap(), Vec::<usize>::new());
        assert_eq!(g.cumulative(1).unwrap(), vec![0, 1]);
        assert_eq!(g.cumulative(2).unwrap(), vec![0, 1, 2, 3]);
        assert!(matches!(g.cumulative(3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn vertex_context_partitions_cumulative() {
        let l = Layering::from_sizes(&[2, 3, 2]).unwrap();
        for v in 0..l.p() {
            let ctx = l.context(v);
            let mut all: Vec<usize> = ctx.parents.iter().chain(&ctx.neighbors).copied().collect();
            all.push(v);
            all.sort_unstable();
            assert_eq!(all, l.cumulative(l.layer_of(v) + 1).unwrap());
            assert!(ctx.parents.iter().all(|x| !ctx.neighbors.contains(x)));
        }
    }

    #[test]
    fn toy_missing_directed_edge_independence() {
        let g = toy().validate().unwrap();
        let ci = g.implied_independencies();
        let s = ci.iter().find(|c| c.a == 1 && c.b == 2).unwrap();
        assert_eq!(s.given, vec![0]);
    }

    #[test]
    fn complete_graph_has_no_independencies() {
        let l = Layering::from_sizes(&[2, 2]).unwrap();
        let g = ChainGraph::new(l.clone(), l.candidate_edges()).unwrap();
        assert!(g.implied_independencies().is_empty());
    }

    #[test]
    fn empty_single_layer_of_three() {
        let g = ChainGraph::empty(Layering::from_sizes(&[3]).unwrap());
        let ci = g.implied_independencies();
        // pairs (0,1|2), (0,2|1), (1,2|0)
        let expected = vec![
            Independence { a: 0, b: 1, given: vec![2] },
            Independence { a: 0, b: 2, given: vec![1] },
            Independence { a: 1, b: 2, given: vec![0] },
        ];
        assert_eq!(ci, expected);
    }

    #[test]
    fn component_follows_both_edge_kinds() {
        let g = toy().validate().unwrap();
        assert_eq!(g.connected_component(0).into_iter().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        let g = ChainGraph::new(g.layering().clone(), [Edge::directed(0, 2)]).unwrap();
        assert_eq!(g.connected_component(3).len(), 1);
    }
}
