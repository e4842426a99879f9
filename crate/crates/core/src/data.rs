use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Layering;

/// `n × p` observations with columns in layer order.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    layering: Layering,
    values: DMatrix<f64>,
}

impl Dataset {
    pub fn new(names: Vec<String>, layering: Layering, values: DMatrix<f64>) -> Result<Self> {
        if names.len() != values.ncols() || layering.p() != values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} names, {} layered vertices, {} columns",
                names.len(),
                layering.p(),
                values.ncols()
            )));
        }
        Ok(Self { names, layering, values })
    }

    /// Columns named `1..=p`.
    pub fn with_default_names(layering: Layering, values: DMatrix<f64>) -> Result<Self> {
        let names = default_names(values.ncols());
        Self::new(names, layering, values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn layering(&self) -> &Layering {
        &self.layering
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Rejects `n < 2` and zero-variance columns.
    pub fn check(&self) -> Result<()> {
        if self.n() < 2 {
            return Err(Error::ConfigInvalid(format!("need at least 2 observations, got {}", self.n())));
        }
        for (j, col) in self.values.column_iter().enumerate() {
            let mean = col.mean();
            let ss: f64 = col.iter().map(|x| (x - mean).powi(2)).sum();
            if !(ss > 1e-12 * (1.0 + mean * mean) * self.n() as f64) {
                return Err(Error::DegenerateColumn(self.names[j].clone()));
            }
        }
        Ok(())
    }

    /// Subtracts column means.
    pub fn centered(&self) -> Self {
        let mut values = self.values.clone();
        for mut col in values.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        Self { names: self.names.clone(), layering: self.layering.clone(), values }
    }

    /// Centers and scales every column to unit sample variance.
    pub fn standardized(&self) -> Self {
        let mut out = self.centered();
        let n = out.n().max(2) as f64;
        for mut col in out.values.column_iter_mut() {
            let sd = (col.norm_squared() / (n - 1.0)).sqrt();
            if sd > 0.0 {
                col /= sd;
            }
        }
        out
    }

    /// `YᵀY`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.values.tr_mul(&self.values)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|i| i.to_string()).collect()
}
