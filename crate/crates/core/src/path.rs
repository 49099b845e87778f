use crate::error::{Error, Result};
use crate::random::RandomSource;

/// Samples on the uniform grid `t0 + k·dt`, each of dimension 1 or 2.
///
/// Values are stored row-major in one flat buffer; the grid is never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    t0: f64,
    dt: f64,
    dim: usize,
    values: Vec<f64>,
    pub seed: Option<RandomSource>,
}

impl Path {
    pub fn new(t0: f64, dt: f64, dim: usize, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::domain(format!("path time step must be > 0, got {dt}")));
        }
        if dim != 1 && dim != 2 {
            return Err(Error::shape(format!("path dimension must be 1 or 2, got {dim}")));
        }
        if values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(Error::shape(format!(
                "path needs a non-empty multiple of {dim} values, got {}",
                values.len()
            )));
        }
        Ok(Self { t0, dt, dim, values, seed: None })
    }

    pub fn scalar(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        Self::new(t0, dt, 1, values)
    }

    /// Interleave two equally long component series into a 2-dim path.
    pub fn zip(t0: f64, dt: f64, first: &[f64], second: &[f64]) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::shape("zip: components differ in length"));
        }
        let values = first.iter().zip(second).flat_map(|(&a, &b)| [a, b]).collect();
        Self::new(t0, dt, 2, values)
    }

    pub fn with_seed(mut self, src: RandomSource) -> Self {
        self.seed = Some(src);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn get(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn flat(&self) -> &[f64] {
        &self.values
    }

    /// The values of a one-dimensional path.
    pub fn values(&self) -> Result<&[f64]> {
        if self.dim != 1 {
            return Err(Error::shape("expected a one-dimensional path"));
        }
        Ok(&self.values)
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    pub fn last(&self) -> &[f64] {
        self.get(self.len() - 1)
    }
}
