use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::Scalar;

/// Reference frames along rows, test frames along columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceMatrix<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
}

impl<T: Scalar> DifferenceMatrix<T> {
    pub fn from_vec(rows: usize, cols: usize, values: Vec<T>) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![rows, cols],
                found: vec![values.len()],
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let values = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        Self { rows, cols, values }
    }

    /// Number of reference frames.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of test frames.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, reference: usize, test: usize) -> T {
        self.values[reference * self.cols + test]
    }

    pub fn set(&mut self, reference: usize, test: usize, v: T) {
        self.values[reference * self.cols + test] = v;
    }

    pub fn column(&self, test: usize) -> Vec<T> {
        (0..self.rows).map(|s| self.get(s, test)).collect()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Frame-to-frame feature difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// ‖a − b‖² on latent codes.
    SquaredEuclidean,
    /// Mean absolute difference on SAD features.
    Sad,
}

impl Metric {
    pub fn apply<T: Scalar>(self, a: &[T], b: &[T]) -> Result<T> {
        match self {
            Metric::SquaredEuclidean => code_difference(a, b),
            Metric::Sad => super::sad::sad_difference(a, b),
        }
    }
}

/// Squared Euclidean distance between two codes.
pub fn code_difference<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![a.len()],
            found: vec![b.len()],
        });
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum())
}

pub fn difference_matrix<T: Scalar>(reference: &[Vec<T>], test: &[Vec<T>], metric: Metric) -> Result<DifferenceMatrix<T>> {
    if reference.is_empty() || test.is_empty() {
        return Err(Error::invalid("difference matrix needs non-empty feature lists"));
    }
    let dim = reference[0].len();
    if let Some(bad) = reference.iter().chain(test).find(|v| v.len() != dim) {
        return Err(Error::ShapeMismatch {
            expected: vec![dim],
            found: vec![bad.len()],
        });
    }
    let cols = test.len();
    let rows: Vec<Vec<T>> = reference
        .par_iter()
        .map(|r| test.iter().map(|t| metric.apply(r, t)).collect::<Result<Vec<T>>>())
        .collect::<Result<_>>()?;
    DifferenceMatrix::from_vec(reference.len(), cols, rows.into_iter().flatten().collect())
}
