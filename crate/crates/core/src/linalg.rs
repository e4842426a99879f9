//! Small dense Cholesky kernel for the sampler's inner loop.
//!
//! Active sets in the node-wise regressions are small, so the sampler
//! refactorizes on every move instead of maintaining rank-one updates.
//! Storage is row-major and reused between calls.

use crate::error::{Error, Result};

/// Pivots below this are treated as a failed factorization.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, Default)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Factorizes the `n × n` row-major symmetric matrix produced by `entry`.
    /// Only the lower triangle is read.
    pub fn factor(&mut self, n: usize, entry: impl Fn(usize, usize) -> f64) -> Result<()> {
        self.n = n;
        self.l.clear();
        self.l.resize(n * n, 0.0);
        for i in 0..n {
            for j in 0..=i {
                let mut s = entry(i, j);
                for k in 0..j {
                    s -= self.l[i * n + k] * self.l[j * n + k];
                }
                if i == j {
                    if !(s > PIVOT_TOLERANCE) {
                        return Err(Error::FactorizationFailure(format!(
                            "pivot {s:e} at {i} below tolerance"
                        )));
                    }
                    self.l[i * n + i] = s.sqrt();
                } else {
                    self.l[i * n + j] = s / self.l[j * n + j];
                }
            }
        }
        Ok(())
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>() * 2.0
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn solve_upper(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.solve_lower(b);
        self.solve_upper(b);
    }
}
