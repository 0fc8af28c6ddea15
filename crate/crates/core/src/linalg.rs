//! Small dense kernels: Cholesky solves and the cyclic Jacobi eigensolver.

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Off-diagonal tolerance of the Jacobi sweep, relative to the Frobenius norm.
pub const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Lower-triangular Cholesky factor `L` with `m = L Lᵀ`.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::DimensionMismatch("cholesky of a non-square matrix".into()));
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = m[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `m X = b` for SPD `m`, column by column.
pub fn solve_spd(m: &Matrix, b: &Matrix) -> Result<Matrix> {
    let l = cholesky(m)?;
    let n = l.rows();
    if b.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "rhs has {} rows, system is {n}x{n}",
            b.rows()
        )));
    }
    let mut x = b.clone();
    for j in 0..b.cols() {
        // forward: L y = b
        for i in 0..n {
            let mut s = x[(i, j)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / l[(i, i)];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = x[(i, j)];
            for k in i + 1..n {
                s -= l[(k, i)] * x[(k, j)];
            }
            x[(i, j)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

/// Solves `X m = b` for SPD `m` (right division), as used by the factor update.
pub fn solve_spd_right(b: &Matrix, m: &Matrix) -> Result<Matrix> {
    Ok(solve_spd(m, &b.transpose())?.transpose())
}

/// Symmetric eigendecomposition `m = V diag(λ) Vᵀ`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Matching orthonormal eigenvectors as columns.
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigensolver for a symmetric matrix.
///
/// Sweeps until the off-diagonal Frobenius mass drops below
/// [`JACOBI_TOL`] times the total Frobenius norm. Eigenpairs are sorted by
/// descending eigenvalue (stable on ties) and each eigenvector's
/// largest-magnitude entry is made nonnegative.
pub fn symmetric_eigen(m: &Matrix) -> Result<SymmetricEigen> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::DimensionMismatch("eigendecomposition of a non-square matrix".into()));
    }
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let total = a.frobenius_norm();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * total || total == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    normalize_signs(&mut vectors);
    Ok(SymmetricEigen { values, vectors })
}

/// Flips each column so that its largest-magnitude entry (first on ties) is
/// nonnegative.
pub fn normalize_signs(m: &mut Matrix) {
    let rows = m.rows();
    for j in 0..m.cols() {
        let col = m.column(j);
        let mut best = 0;
        for i in 1..rows {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            for i in 0..rows {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}
