//! Conjugate Gaussian regression blocks shared by every update.
//!
//! A block is described by a Gram function `G` over candidate columns, a
//! likelihood scale `s`, a linear term `h = s Xᵀt` and per-coefficient
//! prior precisions `d`. With `Q = s G_AA + diag(d_A)` the coefficients on
//! an active set `A` have conditional posterior `N(Q⁻¹ h_A, Q⁻¹)` and
//!
//! ```text
//! log m(A) − log m(∅) = ½ h_Aᵀ Q⁻¹ h_A − ½ log|Q| + ½ Σ_A log d_i
//! ```

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;

#[derive(Clone, Debug, Default)]
pub(crate) struct Workspace {
    chol: Cholesky,
    buf: Vec<f64>,
    trial: Vec<usize>,
}

pub(crate) struct Block<'a, G, D> {
    pub gram: G,
    pub h: &'a [f64],
    pub scale: f64,
    pub prior_prec: D,
}

impl<G, D> Block<'_, G, D>
where
    G: Fn(usize, usize) -> f64,
    D: Fn(usize) -> f64,
{
    fn factor(&self, ws: &mut Workspace, active: &[usize]) -> Result<()> {
        let k = active.len();
        ws.chol.factor(k, |i, j| {
            let g = self.scale * (self.gram)(active[i], active[j]);
            if i == j {
                g + (self.prior_prec)(active[i])
            } else {
                g
            }
        })
    }

    pub fn log_marginal(&self, ws: &mut Workspace, active: &[usize]) -> Result<f64> {
        self.factor(ws, active)?;
        ws.buf.clear();
        ws.buf.extend(active.iter().map(|&a| self.h[a]));
        ws.chol.solve_lower(&mut ws.buf);
        let quad: f64 = ws.buf.iter().map(|x| x * x).sum();
        let log_prior: f64 = active.iter().map(|&a| (self.prior_prec)(a).ln()).sum();
        Ok(0.5 * quad - 0.5 * ws.chol.log_det() + 0.5 * log_prior)
    }

    /// Draws the coefficients on `active` (in the same order). Consumes no
    /// randomness when `active` is empty.
    pub fn draw<R: Rng + ?Sized>(&self, ws: &mut Workspace, active: &[usize], rng: &mut R) -> Result<Vec<f64>> {
        if active.is_empty() {
            return Ok(Vec::new());
        }
        self.factor(ws, active)?;
        let mut mean: Vec<f64> = active.iter().map(|&a| self.h[a]).collect();
        ws.chol.solve(&mut mean);
        let mut z: Vec<f64> = (0..active.len()).map(|_| rng.sample(StandardNormal)).collect();
        ws.chol.solve_upper(&mut z);
        Ok(mean.iter().zip(&z).map(|(m, e)| m + e).collect())
    }
}

pub(crate) fn inclusion_probability(log_odds: f64) -> Result<f64> {
    if log_odds.is_nan() {
        return Err(Error::NumericalUnderflow("inclusion log-odds"));
    }
    Ok(if log_odds >= 0.0 {
        1.0 / (1.0 + (-log_odds).exp())
    } else {
        let e = log_odds.exp();
        e / (1.0 + e)
    })
}

fn insert_sorted(v: &mut Vec<usize>, x: usize) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}

fn remove_sorted(v: &mut Vec<usize>, x: usize) {
    if let Ok(pos) = v.binary_search(&x) {
        v.remove(pos);
    }
}

/// Single-site Gibbs over inclusion indicators of `candidates`, with the
/// coefficients integrated out. `include` is indexed by candidate id.
/// Returns the sorted active set.
pub(crate) fn ssvs_sweep<G, D, R>(
    block: &Block<'_, G, D>,
    ws: &mut Workspace,
    candidates: &[usize],
    include: &mut [bool],
    log_prior_odds: impl Fn(usize) -> f64,
    rng: &mut R,
) -> Result<Vec<usize>>
where
    G: Fn(usize, usize) -> f64,
    D: Fn(usize) -> f64,
    R: Rng + ?Sized,
{
    let mut active: Vec<usize> = candidates.iter().copied().filter(|&c| include[c]).collect();
    active.sort_unstable();
    if candidates.is_empty() {
        return Ok(active);
    }
    let mut current = block.log_marginal(ws, &active)?;
    for &c in candidates {
        let mut trial = std::mem::take(&mut ws.trial);
        trial.clear();
        trial.extend_from_slice(&active);
        let (with, without) = if include[c] {
            remove_sorted(&mut trial, c);
            (current, block.log_marginal(ws, &trial)?)
        } else {
            insert_sorted(&mut trial, c);
            (block.log_marginal(ws, &trial)?, current)
        };
        ws.trial = trial;
        let prob = inclusion_probability(with - without + log_prior_odds(c))?;
        let on = rng.random::<f64>() < prob;
        if on != include[c] {
            include[c] = on;
            if on {
                insert_sorted(&mut active, c);
            } else {
                remove_sorted(&mut active, c);
            }
        }
        current = if on { with } else { without };
    }
    Ok(active)
}

pub(crate) fn draw_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::NumericalUnderflow(if e == rand_distr::GammaError::ShapeTooSmall { "gamma shape" } else { "gamma rate" }))?;
    let x = g.sample(rng);
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NumericalUnderflow("precision draw"))
    }
}
