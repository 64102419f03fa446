//! Probability measures over graph nodes.

use crate::error::{Error, Result};
use ndarray::Array1;

const SIMPLEX_TOL: f64 = 1e-12;

/// A point in the probability simplex: nonnegative weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    weights: Array1<f64>,
}

impl Measure {
    pub fn new(weights: Array1<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Validation("measure must have at least one bin".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Validation(
                "measure weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = weights.sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Validation(format!(
                "measure weights sum to {sum}, expected 1 within {SIMPLEX_TOL}"
            )));
        }
        Ok(Self { weights })
    }

    /// Uniform distribution on `n` bins, renormalized so the sum is exactly 1.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("measure must have at least one bin".into()));
        }
        let mut weights = Array1::from_elem(n, 1.0 / n as f64);
        let sum = weights.sum();
        weights /= sum;
        Ok(Self { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }
}
