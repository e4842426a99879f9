//! Gibbs sweeps over one layer.
//!
//! Every sweep runs an undirected step (indicators `η`, coefficients `α`,
//! precisions `κ`) and then a directed step per vertex (indicators `γ`,
//! coefficients `b`, precision `κ`). Indicator moves integrate the slab
//! coefficient out; coefficients and precisions are then drawn from their
//! exact conditionals.
//!
//! * [`SweepKind::Bans`]: one shared indicator per within-layer pair whose
//!   conditional pools both endpoint regressions; `b_i` is drawn from every
//!   regression it appears in (vertex `i` and each current neighbour).
//!   Vertices are visited in order and see each other's fresh values.
//! * [`SweepKind::Fixed`]: as `Bans` with the indicators held fixed.
//! * BANS-parallel ([`LayerSampler::sweep_parallel`]): every vertex updates
//!   its own regression independently against the previous sweep's state,
//!   so `η_ij` and `η_ji` are separate.

use rand::seq::SliceRandom;
use rand::Rng;

use super::kernel::{draw_gamma, inclusion_probability, ssvs_sweep, Block, Workspace};
use super::problem::LayerProblem;
use super::state::{LayerState, NodeRow};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::StreamRng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    Bans,
    Fixed,
}

fn sparse_dot(row: &NodeRow, v: &[f64]) -> f64 {
    row.gamma.iter().zip(&row.b).zip(v).filter(|((&g, _), _)| g).map(|((_, b), x)| b * x).sum()
}

/// `R_j·R_k` and `R_j·T_i` for `R_j = x_j − P b_j`, `T_i = y_i − P b_i`.
struct Cross {
    m: usize,
    rr: Vec<f64>,
    rt: Vec<f64>,
}

impl Cross {
    fn new(problem: &LayerProblem, rows: &[NodeRow]) -> Self {
        let m = problem.m();
        let mut rr = vec![0.0; m * m];
        let mut rt = vec![0.0; m * m];
        for j in 0..m {
            let spx_j = problem.spx_row(j);
            for k in 0..m {
                let spx_k = problem.spx_row(k);
                if k >= j {
                    let v = problem.sxx[j * m + k] - sparse_dot(&rows[k], spx_j) - sparse_dot(&rows[j], spx_k)
                        + sparse_dot(&rows[j], &rows[k].u);
                    rr[j * m + k] = v;
                    rr[k * m + j] = v;
                }
                rt[j * m + k] = problem.sxy[j * m + k] - sparse_dot(&rows[k], spx_j)
                    - sparse_dot(&rows[j], problem.spy_row(k))
                    + sparse_dot(&rows[j], &rows[k].u);
            }
        }
        Self { m, rr, rt }
    }

    /// Linear term of vertex `i`'s within-layer regression at precision `kappa`.
    fn h(&self, i: usize, kappa: f64) -> Vec<f64> {
        (0..self.m).map(|j| kappa * self.rt[j * self.m + i]).collect()
    }

    fn block<'a>(
        &'a self,
        h: &'a [f64],
        kappa: f64,
        lambda: f64,
    ) -> Block<'a, impl Fn(usize, usize) -> f64 + 'a, impl Fn(usize) -> f64> {
        let m = self.m;
        Block { gram: move |a, b| self.rr[a * m + b], h, scale: kappa, prior_prec: move |_| lambda * kappa }
    }
}

fn active_set(flags: &[bool]) -> Vec<usize> {
    flags.iter().enumerate().filter(|(_, &f)| f).map(|(j, _)| j).collect()
}

/// Redraws `row.alpha` on its current within-layer support.
fn draw_alpha<R: Rng + ?Sized>(
    cross: &Cross,
    problem: &LayerProblem,
    i: usize,
    row: &mut NodeRow,
    ws: &mut Workspace,
    rng: &mut R,
) -> Result<()> {
    let h = cross.h(i, row.kappa);
    let block = cross.block(&h, row.kappa, problem.hyper.lambda);
    let active = active_set(&row.eta);
    let coef = block.draw(ws, &active, rng)?;
    row.alpha.iter_mut().for_each(|a| *a = 0.0);
    for (&j, c) in active.iter().zip(coef) {
        row.alpha[j] = c;
    }
    Ok(())
}

/// Residual sum of squares of vertex `i`'s regression.
fn rss(problem: &LayerProblem, rows: &[NodeRow], i: usize, row: &NodeRow) -> f64 {
    let (m, r) = (problem.m(), problem.r());
    let nb: Vec<usize> = (0..m).filter(|&j| j != i && row.alpha[j] != 0.0).collect();
    let mut ww = problem.syy[i * m + i];
    for &j in &nb {
        ww -= 2.0 * row.alpha[j] * problem.sxy[j * m + i];
        for &k in &nb {
            ww += row.alpha[j] * row.alpha[k] * problem.sxx[j * m + k];
        }
    }
    if r == 0 {
        return ww.max(0.0);
    }
    let mut ptw = problem.spy_row(i).to_vec();
    let mut d = row.b.clone();
    let mut sppd = row.u.clone();
    for &j in &nb {
        let a = row.alpha[j];
        for (t, x) in problem.spx_row(j).iter().enumerate() {
            ptw[t] -= a * x;
            d[t] -= a * rows[j].b[t];
            sppd[t] -= a * rows[j].u[t];
        }
    }
    let cross: f64 = d.iter().zip(&ptw).map(|(a, b)| a * b).sum();
    let quad: f64 = d.iter().zip(&sppd).map(|(a, b)| a * b).sum();
    (ww - 2.0 * cross + quad).max(0.0)
}

fn draw_kappa<R: Rng + ?Sized>(
    problem: &LayerProblem,
    rows: &[NodeRow],
    i: usize,
    row: &mut NodeRow,
    rng: &mut R,
) -> Result<()> {
    let hyper = &problem.hyper;
    let n_alpha = row.eta.iter().filter(|&&e| e).count();
    let n_b = row.gamma.iter().filter(|&&g| g).count();
    let shape = hyper.kappa_shape(problem.m()) + 0.5 * (problem.n() + n_alpha + n_b) as f64;
    let alpha_ss: f64 = row.alpha.iter().map(|a| a * a).sum();
    let b_ss: f64 = row.b.iter().map(|b| b * b).sum();
    let rate = hyper.kappa_rate()
        + 0.5 * rss(problem, rows, i, row)
        + 0.5 * hyper.lambda * alpha_ss
        + 0.5 * b_ss / hyper.c2;
    row.kappa = draw_gamma(shape, rate, rng)?;
    Ok(())
}

/// `Pᵀ z` and the coefficient of `P b_i` for every regression containing
/// `b_i`, accumulated into the conjugate linear term and scale.
fn directed_terms(problem: &LayerProblem, rows: &[NodeRow], i: usize, row: &NodeRow, pooled: bool) -> (Vec<f64>, f64) {
    let (m, r) = (problem.m(), problem.r());
    let mut pz = problem.spy_row(i).to_vec();
    for j in (0..m).filter(|&j| j != i && row.alpha[j] != 0.0) {
        let a = row.alpha[j];
        for t in 0..r {
            pz[t] += a * (rows[j].u[t] - problem.spx_row(j)[t]);
        }
    }
    let mut h: Vec<f64> = pz.iter().map(|x| row.kappa * x).collect();
    let mut scale = row.kappa;
    if pooled {
        for w in (0..m).filter(|&w| w != i && rows[w].alpha[i] != 0.0) {
            let other = &rows[w];
            let beta = -other.alpha[i];
            let mut pz: Vec<f64> = problem.spy_row(w).iter().zip(&other.u).map(|(y, u)| y - u).collect();
            for j in (0..m).filter(|&j| j != w && other.alpha[j] != 0.0) {
                let a = other.alpha[j];
                let spx = problem.spx_row(j);
                for t in 0..r {
                    pz[t] -= a * spx[t];
                    if j != i {
                        pz[t] += a * rows[j].u[t];
                    }
                }
            }
            for t in 0..r {
                h[t] += other.kappa * beta * pz[t];
            }
            scale += other.kappa * beta * beta;
        }
    }
    (h, scale)
}

/// Directed step for vertex `i`: `γ_i` (if `select`), `b_i`, then `κ_i`.
/// Node-only updates scan the parents in a fresh random order.
#[allow(clippy::too_many_arguments)]
fn update_directed<R: Rng + ?Sized>(
    problem: &LayerProblem,
    rows: &[NodeRow],
    i: usize,
    row: &mut NodeRow,
    pooled: bool,
    select: bool,
    ws: &mut Workspace,
    rng: &mut R,
) -> Result<()> {
    let r = problem.r();
    if r == 0 {
        return Ok(());
    }
    let (h, scale) = directed_terms(problem, rows, i, row, pooled);
    let prior_prec = row.kappa / problem.hyper.c2;
    let block = Block { gram: |a, b| problem.spp_entry(a, b), h: &h, scale, prior_prec: |_| prior_prec };
    let active = if select {
        let mut candidates: Vec<usize> = (0..r).collect();
        if !pooled {
            candidates.shuffle(rng);
        }
        let odds = &problem.hyper.dir_log_odds[i * r..(i + 1) * r];
        ssvs_sweep(&block, ws, &candidates, &mut row.gamma, |a| odds[a], rng)?
    } else {
        active_set(&row.gamma)
    };
    let coef = block.draw(ws, &active, rng)?;
    row.b.iter_mut().for_each(|b| *b = 0.0);
    for (&a, c) in active.iter().zip(coef) {
        row.b[a] = c;
    }
    row.refresh_u(problem);
    draw_kappa(problem, rows, i, row, rng)
}

/// Gaussian log-likelihood of vertex `i`'s regression.
fn node_log_likelihood(problem: &LayerProblem, rows: &[NodeRow], i: usize) -> f64 {
    let n = problem.n() as f64;
    let row = &rows[i];
    0.5 * n * (row.kappa.ln() - LN_2PI) - 0.5 * row.kappa * rss(problem, rows, i, row)
}

/// Shared `η_ij` update over all pairs in lexicographic order, with both
/// endpoint regressions' coefficients integrated out.
fn update_pairs<R: Rng + ?Sized>(
    cross: &Cross,
    problem: &LayerProblem,
    rows: &mut [NodeRow],
    ws: &mut Workspace,
    rng: &mut R,
) -> Result<()> {
    let m = problem.m();
    let lambda = problem.hyper.lambda;
    let hs: Vec<Vec<f64>> = (0..m).map(|i| cross.h(i, rows[i].kappa)).collect();
    let mut active: Vec<Vec<usize>> = rows.iter().map(|row| active_set(&row.eta)).collect();
    let mut current = (0..m)
        .map(|i| cross.block(&hs[i], rows[i].kappa, lambda).log_marginal(ws, &active[i]))
        .collect::<Result<Vec<f64>>>()?;
    let toggled = |set: &[usize], j: usize| -> Vec<usize> {
        match set.binary_search(&j) {
            Ok(pos) => [&set[..pos], &set[pos + 1..]].concat(),
            Err(pos) => [&set[..pos], &[j], &set[pos..]].concat(),
        }
    };
    for i in 0..m {
        for j in i + 1..m {
            let on = rows[i].eta[j];
            let mut with = [0.0; 2];
            let mut without = [0.0; 2];
            let mut alt_sets = [Vec::new(), Vec::new()];
            for (s, (v, w)) in [(i, j), (j, i)].into_iter().enumerate() {
                let alt = toggled(&active[v], w);
                let lm = cross.block(&hs[v], rows[v].kappa, lambda).log_marginal(ws, &alt)?;
                (with[s], without[s]) = if on { (current[v], lm) } else { (lm, current[v]) };
                alt_sets[s] = alt;
            }
            let log_odds = with[0] - without[0] + with[1] - without[1] + problem.hyper.undir_log_odds[i * m + j];
            let next = rng.random::<f64>() < inclusion_probability(log_odds)?;
            if next != on {
                rows[i].eta[j] = next;
                rows[j].eta[i] = next;
                let [ai, aj] = alt_sets;
                active[i] = ai;
                active[j] = aj;
                current[i] = if next { with[0] } else { without[0] };
                current[j] = if next { with[1] } else { without[1] };
            }
        }
    }
    Ok(())
}

/// One layer's problem and current state.
#[derive(Clone, Debug)]
pub struct LayerSampler {
    problem: LayerProblem,
    state: LayerState,
    ws: Workspace,
    node_ws: Vec<Workspace>,
}

impl LayerSampler {
    pub fn new(problem: LayerProblem) -> Self {
        let state = LayerState::initial(&problem);
        let m = problem.m();
        Self { problem, state, ws: Workspace::default(), node_ws: vec![Workspace::default(); m] }
    }

    pub fn with_state(problem: LayerProblem, state: LayerState) -> Result<Self> {
        let mut out = Self::new(problem);
        out.set_state(state)?;
        Ok(out)
    }

    pub fn problem(&self) -> &LayerProblem {
        &self.problem
    }

    pub fn state(&self) -> &LayerState {
        &self.state
    }

    /// Replaces the state, recomputing cached products.
    pub fn set_state(&mut self, state: LayerState) -> Result<()> {
        self.state = LayerState::from_rows(&self.problem, state.rows)?;
        Ok(())
    }

    /// Swaps in new statistics of the same shape, keeping the state.
    pub fn set_problem(&mut self, problem: LayerProblem) -> Result<()> {
        if problem.m() != self.problem.m() || problem.r() != self.problem.r() {
            return Err(Error::DimensionMismatch("replacement problem has a different shape".into()));
        }
        self.problem = problem;
        self.set_state(self.state.clone())
    }

    /// One Gauss–Seidel sweep (BANS, or fixed structure).
    pub fn sweep<R: Rng + ?Sized>(&mut self, kind: SweepKind, rng: &mut R) -> Result<()> {
        let m = self.problem.m();
        let problem = &self.problem;
        let rows = &mut self.state.rows;
        let cross = Cross::new(problem, rows);
        if kind == SweepKind::Bans {
            update_pairs(&cross, problem, rows, &mut self.ws, rng)?;
        }
        for i in 0..m {
            let mut row = std::mem::take(&mut rows[i]);
            let res = draw_alpha(&cross, problem, i, &mut row, &mut self.ws, rng)
                .and_then(|_| draw_kappa(problem, rows, i, &mut row, rng));
            rows[i] = row;
            res?;
        }
        let select = kind == SweepKind::Bans;
        for i in 0..m {
            let mut row = std::mem::take(&mut rows[i]);
            let res = update_directed(problem, rows, i, &mut row, true, select, &mut self.ws, rng);
            rows[i] = row;
            res?;
        }
        Ok(())
    }

    /// One Jacobi sweep of BANS-parallel: vertex `i` draws from `rngs[i]`.
    pub fn sweep_parallel(&mut self, rngs: &mut [StreamRng], exec: Execution) -> Result<()> {
        let m = self.problem.m();
        if rngs.len() != m {
            return Err(Error::DimensionMismatch(format!("{} streams for {m} vertices", rngs.len())));
        }
        let problem = &self.problem;
        let snapshot = &self.state.rows;
        let cross = Cross::new(problem, snapshot);
        let mut items: Vec<(NodeRow, &mut StreamRng, &mut Workspace, Result<()>)> = snapshot
            .iter()
            .cloned()
            .zip(rngs.iter_mut())
            .zip(self.node_ws.iter_mut())
            .map(|((row, rng), ws)| (row, rng, ws, Ok(())))
            .collect();
        exec.for_each_mut(&mut items, |i, (row, rng, ws, res)| {
            *res = update_node_independently(&cross, problem, snapshot, i, row, ws, &mut **rng);
        });
        let mut rows = Vec::with_capacity(m);
        for (row, _, _, res) in items {
            res?;
            rows.push(row);
        }
        self.state.rows = rows;
        Ok(())
    }

    /// Sum of node log-likelihoods at the current state.
    pub fn log_likelihood(&self) -> f64 {
        (0..self.problem.m()).map(|i| node_log_likelihood(&self.problem, &self.state.rows, i)).sum()
    }
}

fn update_node_independently<R: Rng + ?Sized>(
    cross: &Cross,
    problem: &LayerProblem,
    snapshot: &[NodeRow],
    i: usize,
    row: &mut NodeRow,
    ws: &mut Workspace,
    rng: &mut R,
) -> Result<()> {
    let m = problem.m();
    let h = cross.h(i, row.kappa);
    let block = cross.block(&h, row.kappa, problem.hyper.lambda);
    let mut candidates: Vec<usize> = (0..m).filter(|&j| j != i).collect();
    candidates.shuffle(rng);
    let odds = &problem.hyper.undir_log_odds[i * m..(i + 1) * m];
    ssvs_sweep(&block, ws, &candidates, &mut row.eta, |j| odds[j], rng)?;
    draw_alpha(cross, problem, i, row, ws, rng)?;
    draw_kappa(problem, snapshot, i, row, rng)?;
    update_directed(problem, snapshot, i, row, false, true, ws, rng)
}
