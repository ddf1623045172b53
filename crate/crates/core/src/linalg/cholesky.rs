use super::{LinalgError, Matrix};

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    dim: usize,
    // Column-major, upper triangle left at zero.
    lower: Vec<f64>,
}

impl SpdFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> Matrix {
        Matrix::new(self.dim, self.dim, self.lower.clone()).expect("factor entries are finite")
    }

    #[inline]
    fn l(&self, i: usize, j: usize) -> f64 {
        self.lower[j * self.dim + i]
    }

    /// Solves `A·x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.dim {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim,
                found: b.len(),
            });
        }
        let n = self.dim;
        let mut x = b.to_vec();
        // Forward: L·u = b
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.l(i, j) * x[j];
            }
            x[i] = s / self.l(i, i);
        }
        // Backward: Lᵀ·x = u
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.l(j, i) * x[j];
            }
            x[i] = s / self.l(i, i);
        }
        Ok(x)
    }

    /// `A⁻¹`, assembled column by column.
    pub fn inverse(&self) -> Matrix {
        let n = self.dim;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e).expect("dimension checked");
            inv.col_mut(j).copy_from_slice(&col);
        }
        // Symmetrize away rounding asymmetry.
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = v;
                inv[(j, i)] = v;
            }
        }
        inv
    }

    /// `log |A| = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| self.l(i, i).ln()).sum::<f64>()
    }
}

/// Cholesky factorization of a symmetric positive definite matrix.
///
/// A pivot at or below `dim · ε · max_i A_ii` is reported as
/// [`LinalgError::NotPositiveDefinite`].
pub fn spd_factorize(a: &Matrix) -> Result<SpdFactor, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.rows(),
            found: a.cols(),
        });
    }
    if !a.is_symmetric() {
        return Err(LinalgError::NotSymmetric);
    }
    let n = a.rows();
    let max_diag = a.diag().into_iter().fold(0.0_f64, f64::max);
    let tol = n as f64 * f64::EPSILON * max_diag;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            let v = l[k * n + j];
            d -= v * v;
        }
        if !(d > tol) {
            return Err(LinalgError::NotPositiveDefinite { index: j, pivot: d });
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[k * n + i] * l[k * n + j];
            }
            l[j * n + i] = s / d;
        }
    }
    Ok(SpdFactor { dim: n, lower: l })
}

pub fn spd_solve(factor: &SpdFactor, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    factor.solve(b)
}

/// Natural log of the determinant of an SPD matrix.
pub fn log_det_spd(a: &Matrix) -> Result<f64, LinalgError> {
    Ok(spd_factorize(a)?.log_det())
}
