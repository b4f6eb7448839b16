//! Dense symmetric linear algebra for small matrices: Cholesky solves,
//! Jacobi eigendecomposition, and the SPD square root needed by the
//! closed-form Gaussian distance. Covariance blocks here are tiny (a few
//! dozen rows at most), so cyclic Jacobi is plenty and keeps the whole
//! stack generic over the scalar type.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<F: Scalar>(a: &Array2<F>) -> Result<Array2<F>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch("cholesky needs a square matrix".into()));
    }
    let mut l = Array2::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if diag <= F::zero() || !diag.is_finite() {
            return Err(Error::Numeric(format!(
                "matrix is not positive definite (pivot {} at column {j})",
                diag
            )));
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Ok(l)
}

/// Solve `A x = b` for SPD `A` given its Cholesky factor.
pub fn cholesky_solve_vec<F: Scalar>(l: &Array2<F>, b: &Array1<F>) -> Array1<F> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in 0..n {
        for k in 0..i {
            let lik = l[[i, k]];
            let xk = x[k];
            x[i] -= lik * xk;
        }
        x[i] /= l[[i, i]];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let lki = l[[k, i]];
            let xk = x[k];
            x[i] -= lki * xk;
        }
        x[i] /= l[[i, i]];
    }
    x
}

/// Solve `A X = B` column-by-column for SPD `A`.
pub fn spd_solve<F: Scalar>(a: &Array2<F>, b: &Array2<F>) -> Result<Array2<F>> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch("spd_solve: row counts differ".into()));
    }
    let l = cholesky(a)?;
    let mut x = Array2::zeros(b.dim());
    for (j, col) in b.columns().into_iter().enumerate() {
        let solved = cholesky_solve_vec(&l, &col.to_owned());
        x.column_mut(j).assign(&solved);
    }
    Ok(x)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues and the orthogonal matrix of eigenvectors (columns),
/// with `A = V Λ Vᵀ` up to roundoff.
pub fn symmetric_eigen<F: Scalar>(a: &Array2<F>) -> Result<(Array1<F>, Array2<F>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch("symmetric_eigen needs a square matrix".into()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("symmetric_eigen input".into()));
    }
    let mut m = a.clone();
    // Symmetrize up front; callers pass algebraically symmetric matrices.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (m[[i, j]] + m[[j, i]]) / F::cast(2.0);
            m[[i, j]] = avg;
            m[[j, i]] = avg;
        }
    }
    let mut v: Array2<F> = Array2::eye(n);
    let scale = m.iter().fold(F::zero(), |acc, x| acc.max(x.abs())).max(F::one());
    let stop = scale * F::epsilon();

    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut off = F::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m[[i, j]].abs());
            }
        }
        if off <= stop {
            let eigvals = Array1::from_iter((0..n).map(|i| m[[i, i]]));
            return Ok((eigvals, v));
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= stop * F::cast(1e-3) {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let tau = (aqq - app) / (F::cast(2.0) * apq);
                let t = if tau >= F::zero() {
                    F::one() / (tau + (F::one() + tau * tau).sqrt())
                } else {
                    F::one() / (tau - (F::one() + tau * tau).sqrt())
                };
                let c = F::one() / (F::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::Numeric("Jacobi eigendecomposition did not converge".into()))
}

/// Symmetric square root of a positive semidefinite matrix via
/// eigendecomposition, flooring eigenvalues at `floor` before the root.
pub fn spd_sqrt<F: Scalar>(a: &Array2<F>, floor: F) -> Result<Array2<F>> {
    let (vals, vecs) = symmetric_eigen(a)?;
    let scale = vals.iter().fold(F::zero(), |acc, x| acc.max(x.abs())).max(F::one());
    for &l in vals.iter() {
        if l < -scale * F::epsilon().sqrt() {
            return Err(Error::Numeric(format!(
                "matrix is not positive semidefinite (eigenvalue {l})"
            )));
        }
    }
    let roots: Vec<F> = vals.iter().map(|&l| l.max(floor).sqrt()).collect();
    let n = a.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut s = F::zero();
            for (k, &r) in roots.iter().enumerate() {
                s += vecs[[i, k]] * r * vecs[[j, k]];
            }
            out[[i, j]] = s;
        }
    }
    Ok(out)
}

pub fn trace<F: Scalar>(a: &Array2<F>) -> F {
    (0..a.nrows().min(a.ncols())).map(|i| a[[i, i]]).sum()
}
