use nalgebra::{DMatrix, DVector};

use super::problem::LayerProblem;
use crate::datagen::MlggmParameters;
use crate::error::{Error, Result};
use crate::graph::Layering;

/// One vertex's share of a layer's parameters.
///
/// `eta[j]`/`alpha[j]` are the within-layer indicator and coefficient of
/// local vertex `j` in this vertex's regression, `gamma[a]`/`b[a]` those of
/// parent `a`. `u = PᵀP b` is cached because every neighbour's update
/// needs it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeRow {
    pub eta: Vec<bool>,
    pub alpha: Vec<f64>,
    pub gamma: Vec<bool>,
    pub b: Vec<f64>,
    pub(crate) u: Vec<f64>,
    pub kappa: f64,
}

impl NodeRow {
    /// A row with the cached products left empty; [`LayerState::from_rows`]
    /// fills them in.
    pub fn new(eta: Vec<bool>, alpha: Vec<f64>, gamma: Vec<bool>, b: Vec<f64>, kappa: f64) -> Self {
        Self { eta, alpha, gamma, b, u: Vec::new(), kappa }
    }

    fn empty(m: usize, r: usize, kappa: f64) -> Self {
        Self {
            eta: vec![false; m],
            alpha: vec![0.0; m],
            gamma: vec![false; r],
            b: vec![0.0; r],
            u: vec![0.0; r],
            kappa,
        }
    }

    pub(crate) fn refresh_u(&mut self, problem: &LayerProblem) {
        let r = problem.r();
        for a in 0..r {
            self.u[a] = (0..r).filter(|&c| self.gamma[c]).map(|c| problem.spp_entry(a, c) * self.b[c]).sum();
        }
    }
}

/// Parameters of one layer's node-wise regressions.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub(crate) m: usize,
    pub(crate) r: usize,
    pub(crate) rows: Vec<NodeRow>,
}

impl LayerState {
    /// No edges; `κ_i` set to the inverse mean square of `y_i`.
    pub fn initial(problem: &LayerProblem) -> Self {
        let (m, r, n) = (problem.m(), problem.r(), problem.n().max(1) as f64);
        let rows = (0..m)
            .map(|i| {
                let ms = problem.syy[i * m + i] / n;
                NodeRow::empty(m, r, if ms > 0.0 { 1.0 / ms } else { 1.0 })
            })
            .collect();
        Self { m, r, rows }
    }

    /// Builds a state from explicit rows, recomputing the cached products.
    pub fn from_rows(problem: &LayerProblem, mut rows: Vec<NodeRow>) -> Result<Self> {
        let (m, r) = (problem.m(), problem.r());
        if rows.len() != m {
            return Err(Error::DimensionMismatch(format!("{} rows for a layer of {m}", rows.len())));
        }
        for row in &mut rows {
            if row.eta.len() != m || row.alpha.len() != m || row.gamma.len() != r || row.b.len() != r {
                return Err(Error::DimensionMismatch("row does not match layer dimensions".into()));
            }
            row.u = vec![0.0; r];
            row.refresh_u(problem);
        }
        Ok(Self { m, r, rows })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn rows(&self) -> &[NodeRow] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &NodeRow {
        &self.rows[i]
    }

    pub fn kappa(&self, i: usize) -> f64 {
        self.rows[i].kappa
    }

    pub fn is_eta_symmetric(&self) -> bool {
        (0..self.m).all(|i| (0..i).all(|j| self.rows[i].eta[j] == self.rows[j].eta[i]))
    }

    /// Number of support-consistency or positivity violations.
    pub fn violations(&self) -> usize {
        let mut bad = 0;
        for (i, row) in self.rows.iter().enumerate() {
            bad += usize::from(row.eta[i] || row.alpha[i] != 0.0);
            bad += row.eta.iter().zip(&row.alpha).filter(|(&e, &a)| e != (a != 0.0)).count();
            bad += row.gamma.iter().zip(&row.b).filter(|(&g, &b)| g != (b != 0.0)).count();
            bad += usize::from(!(row.kappa > 0.0 && row.kappa.is_finite()));
        }
        bad
    }
}

/// Global view of all indicators and coefficients, `p × p`.
///
/// `b[(v, w)]` is the coefficient of `Y_w` in the equation for `Y_v`, as in
/// `Y = BY + ε`; `alpha[(v, w)]` is the coefficient of the adjusted
/// neighbour `w` in the working model of `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerState {
    pub gamma: DMatrix<bool>,
    pub b: DMatrix<f64>,
    pub eta: DMatrix<bool>,
    pub alpha: DMatrix<f64>,
    pub kappa: DVector<f64>,
}

impl SamplerState {
    pub fn empty(p: usize) -> Self {
        Self {
            gamma: DMatrix::from_element(p, p, false),
            b: DMatrix::zeros(p, p),
            eta: DMatrix::from_element(p, p, false),
            alpha: DMatrix::zeros(p, p),
            kappa: DVector::from_element(p, 1.0),
        }
    }

    pub fn p(&self) -> usize {
        self.kappa.len()
    }

    /// The state implied by generating parameters: `α_vw = −K_vw / K_vv`,
    /// `κ_vv = K_vv`.
    pub fn from_parameters(params: &MlggmParameters) -> Self {
        let p = params.p();
        let b = params.b().clone();
        let alpha = DMatrix::from_fn(p, p, |v, w| if v == w { 0.0 } else { params.alpha(v, w) });
        Self {
            gamma: b.map(|x| x != 0.0),
            eta: alpha.map(|x| x != 0.0),
            b,
            alpha,
            kappa: params.k().diagonal(),
        }
    }

    pub fn absorb_layer(&mut self, problem: &LayerProblem, state: &LayerState) {
        let (vs, ps) = (problem.vertices(), problem.parents());
        for (i, row) in state.rows.iter().enumerate() {
            let v = vs[i];
            for (j, &w) in vs.iter().enumerate() {
                self.eta[(v, w)] = row.eta[j];
                self.alpha[(v, w)] = row.alpha[j];
            }
            for (a, &w) in ps.iter().enumerate() {
                self.gamma[(v, w)] = row.gamma[a];
                self.b[(v, w)] = row.b[a];
            }
            self.kappa[v] = row.kappa;
        }
    }

    /// Extracts layer `k`'s rows.
    pub fn layer_state(&self, layering: &Layering, problem: &LayerProblem) -> Result<LayerState> {
        if layering.p() != self.p() {
            return Err(Error::DimensionMismatch("state and layering disagree on p".into()));
        }
        let (vs, ps) = (problem.vertices(), problem.parents());
        let rows = vs
            .iter()
            .map(|&v| NodeRow {
                eta: vs.iter().map(|&w| self.eta[(v, w)]).collect(),
                alpha: vs.iter().map(|&w| self.alpha[(v, w)]).collect(),
                gamma: ps.iter().map(|&w| self.gamma[(v, w)]).collect(),
                b: ps.iter().map(|&w| self.b[(v, w)]).collect(),
                u: Vec::new(),
                kappa: self.kappa[v],
            })
            .collect();
        LayerState::from_rows(problem, rows)
    }
}
