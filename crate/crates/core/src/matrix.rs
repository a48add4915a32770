//! Dense token containers shared by every stage of the filter.

use crate::error::{Error, Result};

/// An `N x D` row-major matrix of latent tokens. Row `i` is token `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    values: Vec<f64>,
    n_tokens: usize,
    dim: usize,
}

impl TokenMatrix {
    pub fn new(n_tokens: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if n_tokens == 0 || dim == 0 {
            return Err(Error::Shape(format!(
                "token matrix must be at least 1x1, got {n_tokens}x{dim}"
            )));
        }
        if values.len() != n_tokens * dim {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {n_tokens}x{dim} matrix",
                values.len()
            )));
        }
        Ok(Self {
            values,
            n_tokens,
            dim,
        })
    }

    pub fn zeros(n_tokens: usize, dim: usize) -> Result<Self> {
        Self::new(n_tokens, dim, vec![0.0; n_tokens * dim])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(n, d, rows.concat())
    }

    pub fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_tokens, self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("{what} contains non-finite entries")))
        }
    }

    pub(crate) fn ensure_same_shape(&self, other: &TokenMatrix, what: &str) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: expected {:?}, got {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }
}

/// Per-token variances. Every entry is strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceVector(Vec<f64>);

impl VarianceVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("variance vector must be non-empty".into()));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "variance entries must be finite and positive, got {bad}"
            )));
        }
        Ok(Self(values))
    }

    pub fn filled(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| *v > 0.0));
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn mean(&self) -> f64 {
        mean(&self.0)
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub(crate) fn check_len(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape(format!("{what}: expected length {expected}, got {got}")))
    }
}
