//! Dense parameter vectors.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in parameter space (the iterate, a gradient, a perturbation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    /// Builds a vector, rejecting NaN and infinite entries.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("ParamVector::new"));
        }
        Ok(ParamVector(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        ParamVector(vec![value; dim])
    }

    /// Unit vector along coordinate `k`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[k] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch { expected, got: self.dim() });
        }
        Ok(())
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn add(&self, other: &ParamVector) -> ParamVector {
        debug_assert_eq!(self.dim(), other.dim());
        ParamVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        debug_assert_eq!(self.dim(), other.dim());
        ParamVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, factor: f64) -> ParamVector {
        ParamVector(self.0.iter().map(|a| a * factor).collect())
    }

    /// `self += factor * other`
    pub fn axpy(&mut self, factor: f64, other: &ParamVector) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
    }

    pub fn distance(&self, other: &ParamVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Arithmetic mean of a non-empty set of equal-dimension vectors.
    pub fn mean<'a, I>(vectors: I) -> Option<ParamVector>
    where
        I: IntoIterator<Item = &'a ParamVector>,
    {
        let mut iter = vectors.into_iter();
        let first = iter.next()?;
        let mut acc = first.clone();
        let mut count = 1usize;
        for v in iter {
            acc.axpy(1.0, v);
            count += 1;
        }
        Some(acc.scale(1.0 / count as f64))
    }
}

impl From<Vec<f64>> for ParamVector {
    /// Unchecked conversion; callers producing values from arithmetic should
    /// check [`ParamVector::is_finite`] at their boundary.
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}
