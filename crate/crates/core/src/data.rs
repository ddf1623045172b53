//! The full data `(Z, y)`: covariates stored column by column plus the
//! response vector.

use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("data must have at least one row and one covariate")]
    Empty,
    #[error("response has {found} entries but covariates have {expected} rows")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite value in column {column}, row {row}")]
    NonFinite { column: usize, row: usize },
}

impl From<LinalgError> for DataError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::NonFinite { row, col } => DataError::NonFinite { column: col, row },
            LinalgError::DimensionMismatch { expected, found } => {
                DataError::LengthMismatch { expected, found }
            }
            _ => DataError::Empty,
        }
    }
}

/// Immutable regression data with `n > 0` rows and `p > 0` covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    covariates: Matrix,
    response: Vec<f64>,
}

impl DataMatrix {
    pub fn new(covariates: Matrix, response: Vec<f64>) -> Result<Self, DataError> {
        if covariates.rows() == 0 || covariates.cols() == 0 {
            return Err(DataError::Empty);
        }
        if response.len() != covariates.rows() {
            return Err(DataError::LengthMismatch {
                expected: covariates.rows(),
                found: response.len(),
            });
        }
        if let Some(row) = response.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite {
                column: covariates.cols(),
                row,
            });
        }
        Ok(Self {
            covariates,
            response,
        })
    }

    pub fn from_columns(columns: Vec<Vec<f64>>, response: Vec<f64>) -> Result<Self, DataError> {
        Self::new(Matrix::from_columns(columns)?, response)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.covariates.rows()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.covariates.cols()
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        self.covariates.col(j)
    }

    pub fn covariates(&self) -> &Matrix {
        &self.covariates
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    /// Design matrix `[1, Z]`.
    pub fn design(&self) -> Matrix {
        self.covariates.with_intercept()
    }

    /// Rows `indices` (in the given order), covariates and response.
    pub fn take_rows(&self, indices: &[usize]) -> (Matrix, Vec<f64>) {
        let z = self.covariates.select_rows(indices);
        let y = indices.iter().map(|&i| self.response[i]).collect();
        (z, y)
    }

    /// A new dataset made of rows `indices`; rows may repeat.
    pub fn resample(&self, indices: &[usize]) -> DataMatrix {
        let (z, y) = self.take_rows(indices);
        DataMatrix {
            covariates: z,
            response: y,
        }
    }

    pub fn into_parts(self) -> (Matrix, Vec<f64>) {
        (self.covariates, self.response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        assert_eq!(
            DataMatrix::from_columns(vec![vec![1.0, 2.0]], vec![1.0]),
            Err(DataError::LengthMismatch {
                expected: 2,
                found: 1
            })
        );
        assert_eq!(
            DataMatrix::from_columns(vec![], vec![]),
            Err(DataError::Empty)
        );
        assert!(matches!(
            DataMatrix::from_columns(vec![vec![1.0, f64::NAN]], vec![1.0, 2.0]),
            Err(DataError::NonFinite { column: 0, row: 1 })
        ));
    }

    #[test]
    fn take_rows_materializes() {
        let d = DataMatrix::from_columns(vec![vec![0.0, 1.0, 2.0]], vec![5.0, 6.0, 7.0]).unwrap();
        let (z, y) = d.take_rows(&[2, 0]);
        assert_eq!(z.col(0), &[2.0, 0.0]);
        assert_eq!(y, vec![7.0, 5.0]);
        assert_eq!(d.design().col(0), &[1.0, 1.0, 1.0]);
    }
}
