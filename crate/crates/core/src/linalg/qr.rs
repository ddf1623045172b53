use rayon::prelude::*;

use super::{dot, LinalgError, Matrix};

/// Work (rows × trailing columns) above which reflector application is
/// spread over the rayon pool. Each column is updated independently, so the
/// result does not depend on the thread count.
const PARALLEL_WORK: usize = 1 << 17;

/// Householder QR factorization of a tall matrix, stored compactly: `R` in
/// the upper triangle, reflector tails below the diagonal.
#[derive(Debug, Clone)]
pub struct QrFactor {
    rows: usize,
    cols: usize,
    packed: Vec<f64>,
    tau: Vec<f64>,
}

/// Least-squares solution and its residual sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coef: Vec<f64>,
    pub rss: f64,
}

impl QrFactor {
    /// Factorizes `x` (n × q, n ≥ q). Fails with
    /// [`LinalgError::RankDeficient`] when `|R_jj| < n · ε · max column norm`.
    pub fn new(x: &Matrix) -> Result<Self, LinalgError> {
        let (n, q) = (x.rows(), x.cols());
        if n < q {
            return Err(LinalgError::TooFewRows { needed: q, found: n });
        }
        let max_norm = (0..q)
            .map(|j| dot(x.col(j), x.col(j)).sqrt())
            .fold(0.0_f64, f64::max);
        let tol = n as f64 * f64::EPSILON * max_norm;

        let mut a = x.as_slice().to_vec();
        let mut tau = vec![0.0; q];
        for j in 0..q {
            let (head, tail) = a.split_at_mut((j + 1) * n);
            let col = &mut head[j * n..];
            let alpha = col[j];
            let xnorm = dot(&col[j + 1..], &col[j + 1..]).sqrt();
            let beta = if xnorm == 0.0 {
                tau[j] = 0.0;
                alpha
            } else {
                let beta = -alpha.signum() * alpha.hypot(xnorm);
                tau[j] = (beta - alpha) / beta;
                let scale = 1.0 / (alpha - beta);
                col[j + 1..].iter_mut().for_each(|v| *v *= scale);
                beta
            };
            col[j] = beta;
            if beta.abs() < tol || beta == 0.0 {
                return Err(LinalgError::RankDeficient { column: j });
            }
            let t = tau[j];
            if t == 0.0 {
                continue;
            }
            let v = &col[j..];
            let apply = |c: &mut [f64]| {
                let c = &mut c[j..];
                let w = c[0] + dot(&v[1..], &c[1..]);
                let tw = t * w;
                c[0] -= tw;
                for (ci, vi) in c[1..].iter_mut().zip(&v[1..]) {
                    *ci -= tw * vi;
                }
            };
            if n * (q - j - 1) >= PARALLEL_WORK {
                tail.par_chunks_mut(n).for_each(apply);
            } else {
                tail.chunks_mut(n).for_each(apply);
            }
        }
        Ok(Self {
            rows: n,
            cols: q,
            packed: a,
            tau,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    fn r(&self, i: usize, j: usize) -> f64 {
        self.packed[j * self.rows + i]
    }

    /// Upper-triangular factor `R` (q × q).
    pub fn r_matrix(&self) -> Matrix {
        let q = self.cols;
        let mut r = Matrix::zeros(q, q);
        for j in 0..q {
            for i in 0..=j {
                r[(i, j)] = self.r(i, j);
            }
        }
        r
    }

    /// Applies `Qᵀ` to a vector of length n.
    pub fn apply_qt(&self, y: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if y.len() != self.rows {
            return Err(LinalgError::DimensionMismatch {
                expected: self.rows,
                found: y.len(),
            });
        }
        let n = self.rows;
        let mut out = y.to_vec();
        for j in 0..self.cols {
            let t = self.tau[j];
            if t == 0.0 {
                continue;
            }
            let v = &self.packed[j * n + j + 1..(j + 1) * n];
            let w = out[j] + dot(v, &out[j + 1..]);
            let tw = t * w;
            out[j] -= tw;
            for (o, vi) in out[j + 1..].iter_mut().zip(v) {
                *o -= tw * vi;
            }
        }
        Ok(out)
    }

    /// Minimizes `‖y − X·coef‖²`.
    pub fn least_squares(&self, y: &[f64]) -> Result<LeastSquares, LinalgError> {
        let qty = self.apply_qt(y)?;
        let q = self.cols;
        let mut coef = qty[..q].to_vec();
        for i in (0..q).rev() {
            let mut s = coef[i];
            for j in i + 1..q {
                s -= self.r(i, j) * coef[j];
            }
            coef[i] = s / self.r(i, i);
        }
        let rss = dot(&qty[q..], &qty[q..]);
        Ok(LeastSquares { coef, rss })
    }

    /// `R⁻¹`, upper triangular.
    pub fn r_inverse(&self) -> Matrix {
        let q = self.cols;
        let mut inv = Matrix::zeros(q, q);
        for j in 0..q {
            inv[(j, j)] = 1.0 / self.r(j, j);
            for i in (0..j).rev() {
                let mut s = 0.0;
                for l in i + 1..=j {
                    s += self.r(i, l) * inv[(l, j)];
                }
                inv[(i, j)] = -s / self.r(i, i);
            }
        }
        inv
    }

    /// `(XᵀX)⁻¹ = R⁻¹ R⁻ᵀ`.
    pub fn xtx_inverse(&self) -> Matrix {
        let ri = self.r_inverse();
        let q = self.cols;
        let mut out = Matrix::zeros(q, q);
        for a in 0..q {
            for b in 0..=a {
                // rows a and b of R⁻¹; entries below the diagonal are zero
                let start = a.max(b);
                let s: f64 = (start..q).map(|l| ri[(a, l)] * ri[(b, l)]).sum();
                out[(a, b)] = s;
                out[(b, a)] = s;
            }
        }
        out
    }

    /// Squared row norms of the thin `Q = X·R⁻¹`, i.e. the leverage scores
    /// of the factorized design. Needs the original design matrix.
    pub fn row_leverage(&self, x: &Matrix) -> Result<Vec<f64>, LinalgError> {
        if x.rows() != self.rows || x.cols() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.rows * self.cols,
                found: x.rows() * x.cols(),
            });
        }
        let ri = self.r_inverse();
        let n = self.rows;
        let mut h = vec![0.0; n];
        let mut qcol = vec![0.0; n];
        for a in 0..self.cols {
            qcol.iter_mut().for_each(|v| *v = 0.0);
            for b in 0..=a {
                let c = ri[(b, a)];
                for (qv, xv) in qcol.iter_mut().zip(x.col(b)) {
                    *qv += xv * c;
                }
            }
            for (hv, qv) in h.iter_mut().zip(&qcol) {
                *hv += qv * qv;
            }
        }
        Ok(h)
    }
}

/// Least squares by Householder QR.
pub fn least_squares(x: &Matrix, y: &[f64]) -> Result<LeastSquares, LinalgError> {
    if y.len() != x.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: x.rows(),
            found: y.len(),
        });
    }
    QrFactor::new(x)?.least_squares(y)
}
