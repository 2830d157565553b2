//! Row-major embedding matrices for visual and text tokens.

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// A dense `rows x dim` matrix of token embeddings, one token per row.
///
/// Construction validates shape and finiteness, so every instance holds at
/// least one row and one column of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<T> {
    rows: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn new(rows: usize, dim: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != rows * dim {
            return Err(Error::Malformed(format!(
                "expected {} values for a {rows}x{dim} matrix, got {}",
                rows * dim,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self { rows, dim, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Malformed(format!(
                    "row {i} has {} columns, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: T) -> Result<Self> {
        Self::new(self.rows, self.dim, self.data.iter().map(|&x| x * c).collect())
    }

    /// Copy with every row rescaled to unit Euclidean norm; zero rows stay zero.
    pub fn unit_rows(&self) -> Self {
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.dim) {
            let norm = dot(row, row).sqrt();
            if norm > T::zero() {
                row.iter_mut().for_each(|x| *x /= norm);
            }
        }
        Self {
            rows: self.rows,
            dim: self.dim,
            data,
        }
    }

    /// Copy with an extra row appended.
    pub fn with_row(&self, row: &[T]) -> Result<Self> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                visual: self.dim,
                text: row.len(),
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(row);
        Self::new(self.rows + 1, self.dim, data)
    }

    /// Copy with rows reordered so that output row `i` is input row `order[i]`.
    pub fn permuted_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.rows {
            return Err(Error::InvalidParameter("permutation length differs from row count".into()));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for &i in order {
            if i >= self.rows {
                return Err(Error::InvalidParameter(format!("row {i} out of range")));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(self.rows, self.dim, data)
    }

    /// Converts the element type, e.g. `f32` file payloads into `f64` working copies.
    pub fn cast<U: Scalar>(&self) -> Result<EmbeddingMatrix<U>> {
        let data = self
            .data
            .iter()
            .map(|x| U::from_f64(x.to_f64_lossy()).unwrap_or_else(U::nan))
            .collect();
        EmbeddingMatrix::new(self.rows, self.dim, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(matches!(
            EmbeddingMatrix::<f64>::new(0, 3, vec![]),
            Err(Error::EmptyMatrix)
        ));
        assert!(matches!(
            EmbeddingMatrix::new(2, 2, vec![1.0, 2.0, f64::NAN, 0.0]),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
        assert!(matches!(
            EmbeddingMatrix::new(1, 2, vec![1.0_f32, f32::INFINITY]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(EmbeddingMatrix::new(2, 2, vec![1.0_f64; 3]).is_err());
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(EmbeddingMatrix::from_rows(&rows).is_err());
    }

    #[test]
    fn unit_rows_keeps_zero_rows() {
        let m = EmbeddingMatrix::from_rows(&[[3.0_f64, 4.0], [0.0, 0.0]]).unwrap();
        let u = m.unit_rows();
        assert_eq!(u.row(0), &[0.6, 0.8]);
        assert_eq!(u.row(1), &[0.0, 0.0]);
    }
}
