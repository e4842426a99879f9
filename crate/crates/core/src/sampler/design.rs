//! Explicit design matrices of the node-wise working model.
//!
//! The sweeps never form these (they work from Gram blocks); they are the
//! column-level description of the same regressions and are used to check
//! the sweeps and to inspect a state.

use nalgebra::{DMatrix, DVector};

use super::state::SamplerState;
use crate::data::Dataset;
use crate::error::{Error, Result};

fn check(v: usize, state: &SamplerState, data: &Dataset) -> Result<()> {
    if state.p() != data.p() || v >= data.p() {
        return Err(Error::DimensionMismatch(format!(
            "vertex {} with a state over {} and data over {} variables",
            v + 1,
            state.p(),
            data.p()
        )));
    }
    Ok(())
}

/// Within-layer regression of `v`: response `y_v − Y_P b_v` and one column
/// `y_j − Y_P b_j` per candidate neighbour `j` (in label order).
pub fn build_undirected_design(v: usize, state: &SamplerState, data: &Dataset) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check(v, state, data)?;
    let ctx = data.layering().context(v);
    let y = data.values();
    let adjusted = |u: usize| {
        let mut col = y.column(u).into_owned();
        for &w in &ctx.parents {
            col -= state.b[(u, w)] * y.column(w);
        }
        col
    };
    let mut x = DMatrix::zeros(data.n(), ctx.neighbors.len());
    for (c, &j) in ctx.neighbors.iter().enumerate() {
        x.set_column(c, &adjusted(j));
    }
    Ok((adjusted(v), x))
}

/// Between-layer regression of `v`: response `y_v − Y_C α_v` and design
/// `[Y_P, −α_{v,u₁} Y_P, −α_{v,u₂} Y_P, …]` over the current neighbours
/// `u₁ < u₂ < …`, whose coefficient is the stack `(b_v; b_{u₁}; …)`.
/// Also returns the stacked vertex list.
pub fn build_directed_design(
    v: usize,
    state: &SamplerState,
    data: &Dataset,
) -> Result<(DVector<f64>, DMatrix<f64>, Vec<usize>)> {
    check(v, state, data)?;
    let ctx = data.layering().context(v);
    let y = data.values();
    let mut resp = y.column(v).into_owned();
    for &j in &ctx.neighbors {
        resp -= state.alpha[(v, j)] * y.column(j);
    }
    let stacked: Vec<usize> =
        std::iter::once(v).chain(ctx.neighbors.iter().copied().filter(|&j| state.alpha[(v, j)] != 0.0)).collect();
    let r = ctx.parents.len();
    let mut x = DMatrix::zeros(data.n(), r * stacked.len());
    for (blk, &u) in stacked.iter().enumerate() {
        let scale = if u == v { 1.0 } else { -state.alpha[(v, u)] };
        for (a, &w) in ctx.parents.iter().enumerate() {
            x.set_column(blk * r + a, &(y.column(w) * scale));
        }
    }
    Ok((resp, x, stacked))
}

/// Stacked coefficient vector matching [`build_directed_design`].
pub fn stacked_coefficients(v: usize, state: &SamplerState, data: &Dataset, stacked: &[usize]) -> DVector<f64> {
    let parents = data.layering().context(v).parents;
    DVector::from_iterator(
        parents.len() * stacked.len(),
        stacked.iter().flat_map(|&u| parents.iter().map(move |&w| state.b[(u, w)])),
    )
}
