use super::{LinalgError, Matrix};

const MAX_SWEEPS: usize = 100;

/// All eigenvalues of a symmetric matrix in ascending order, by cyclic Jacobi
/// rotations.
pub fn symmetric_eigenvalues(s: &Matrix) -> Result<Vec<f64>, LinalgError> {
    if !s.is_symmetric() {
        return Err(LinalgError::NotSymmetric);
    }
    Ok(jacobi(s))
}

fn jacobi(s: &Matrix) -> Vec<f64> {
    let n = s.rows();
    let mut a = s.clone();
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|j| (0..j).map(move |i| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
            }
        }
    }
    let mut ev = a.diag();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_extremes(s: &Matrix) -> Result<(f64, f64), LinalgError> {
    let ev = symmetric_eigenvalues(s)?;
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(LinalgError::DimensionMismatch {
            expected: 1,
            found: 0,
        }),
    }
}

/// `true` iff the smallest eigenvalue of the (symmetrized) input is `≥ −tol`.
pub fn is_psd(a: &Matrix, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let n = a.rows();
    let mut sym = a.clone();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            sym[(i, j)] = v;
            sym[(j, i)] = v;
        }
    }
    jacobi(&sym).first().map_or(true, |&lo| lo >= -tol)
}
