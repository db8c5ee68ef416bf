//! Hermitian eigendecomposition by cyclic Jacobi rotations, and the
//! positive-semidefiniteness checks built on top of it.

use num_complex::Complex64;

use super::matrix::{cr, ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are ascending; `vectors` holds the matching orthonormal
/// eigenvectors as columns.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Diagonalises a Hermitian matrix with complex Jacobi rotations.
///
/// The input is symmetrised first; callers that care about the Hermitian
/// defect must check it themselves.
pub fn hermitian_eigen(a: &ComplexMatrix) -> Result<HermitianEigen> {
    let n = a.require_square()?;
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = m.max_abs().max(1e-300);
    let eps = 1e-15 * scale;

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[(p, q)].norm());
            }
        }
        if off <= eps {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let abs = apq.norm();
                if abs <= eps * 1e-2 {
                    continue;
                }
                let phase = apq / abs; // e^{i phi}
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (2.0 * abs);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // rotation R: R[p][p]=c, R[p][q]=s, R[q][p]=-s*conj(phase), R[q][q]=c*conj(phase)
                let rqp = -s * phase.conj();
                let rqq = c * phase.conj();
                // m <- R^* m R, applied as column then row updates
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * c + mkq * rqp;
                    m[(k, q)] = mkp * s + mkq * rqq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = mpk * c + mqk * rqp.conj();
                    m[(q, k)] = mpk * s + mqk * rqq.conj();
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c + vkq * rqp;
                    v[(k, q)] = vkp * s + vkq * rqq;
                }
                m[(p, q)] = Complex64::new(0.0, 0.0);
                m[(q, p)] = Complex64::new(0.0, 0.0);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(HermitianEigen { values, vectors })
}

/// Checks positive semidefiniteness of a Hermitian matrix.
///
/// Returns `(is_psd, min_eigenvalue)`; `is_psd` holds when the smallest
/// eigenvalue is at least `-tol * max(1, ||A||)`. Fails on inputs whose
/// Hermitian defect exceeds the same scaled tolerance.
pub fn psd_check(a: &ComplexMatrix, tol: f64) -> Result<(bool, f64)> {
    a.require_square()?;
    let scale = operator_norm_hermitian_bound(a).max(1.0);
    let defect = a.hermitian_defect();
    if defect > tol * scale {
        return Err(Error::NotHermitian { defect, tol: tol * scale });
    }
    let eig = hermitian_eigen(a)?;
    let min = *eig
        .values
        .first()
        .ok_or_else(|| Error::Dimension("empty matrix".into()))?;
    Ok((min >= -tol * scale, min))
}

fn operator_norm_hermitian_bound(a: &ComplexMatrix) -> f64 {
    // max row sum bounds the spectral radius; cheap and adequate for scaling
    let n = a.rows();
    let mut best = 0.0f64;
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..a.cols() {
            s += a[(i, j)].norm();
        }
        best = best.max(s);
    }
    best
}

/// Spectral norm via the largest eigenvalue of `A* A`.
pub fn operator_norm(a: &ComplexMatrix) -> f64 {
    if a.rows() == 0 || a.cols() == 0 {
        return 0.0;
    }
    let g = a.adjoint().matmul(a);
    let eig = hermitian_eigen(&g).expect("gram matrix is square");
    eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Positive square root of a Hermitian PSD matrix; negative eigenvalues
/// within roundoff are clipped to zero.
pub fn psd_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eigen(a)?;
    Ok(rebuild(&eig, |x| x.max(0.0).sqrt()))
}

/// Pseudo-inverse of the positive square root, truncating eigenvalues below
/// `cut` relative to the largest.
pub fn psd_sqrt_pinv(a: &ComplexMatrix, cut: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eigen(a)?;
    let top = eig.values.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let thresh = cut * top.max(1e-300);
    Ok(rebuild(&eig, |x| {
        if x > thresh {
            1.0 / x.sqrt()
        } else {
            0.0
        }
    }))
}

fn rebuild(eig: &HermitianEigen, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let n = eig.values.len();
    let mut d = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = cr(f(eig.values[i]));
    }
    eig.vectors.matmul(&d).matmul(&eig.vectors.adjoint())
}

/// Least-squares expansion of `target` in the Frobenius span of `basis`.
///
/// Returns the coefficients and the norm of the unexplained remainder.
pub fn project_onto_span(basis: &[ComplexMatrix], target: &ComplexMatrix) -> (Vec<C64>, f64) {
    let r = basis.len();
    if r == 0 {
        return (vec![], target.frobenius_norm());
    }
    let mut gram = ComplexMatrix::zeros(r, r);
    let mut rhs = vec![C64::new(0.0, 0.0); r];
    for i in 0..r {
        for j in 0..r {
            gram[(i, j)] = frobenius_inner(&basis[i], &basis[j]);
        }
        rhs[i] = frobenius_inner(&basis[i], target);
    }
    let coeffs = solve_hermitian_pinv(&gram, &rhs, 1e-12);
    let mut fit = ComplexMatrix::zeros(target.rows(), target.cols());
    for (cf, b) in coeffs.iter().zip(basis) {
        fit = &fit + &b.scale(*cf);
    }
    let residual = (target - &fit).frobenius_norm();
    (coeffs, residual)
}

/// Frobenius inner product, conjugate-linear in the first argument.
pub fn frobenius_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    a.entries()
        .iter()
        .zip(b.entries())
        .map(|(x, y)| x.conj() * y)
        .sum()
}

/// Solves `G c = y` for Hermitian PSD `G` through the truncated
/// eigendecomposition pseudo-inverse.
pub fn solve_hermitian_pinv(g: &ComplexMatrix, y: &[C64], cut: f64) -> Vec<C64> {
    let eig = hermitian_eigen(g).expect("gram matrix square");
    let top = eig.values.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let thresh = cut * top.max(1e-300);
    let vt_y = eig.vectors.adjoint().matvec(y);
    let scaled: Vec<C64> = vt_y
        .iter()
        .zip(&eig.values)
        .map(|(z, &l)| if l > thresh { z / cr(l) } else { C64::new(0.0, 0.0) })
        .collect();
    eig.vectors.matvec(&scaled)
}
