//! Matrix exponential by scaling and squaring with a fixed-order Taylor kernel.

use super::matrix::{cr, ComplexMatrix};
use crate::error::{Error, Result};

const TAYLOR_ORDER: usize = 18;
const SCALE_TARGET: f64 = 0.25;

/// Computes `exp(A)`.
///
/// The argument is halved until its norm is below 0.25, a degree-18 Taylor
/// polynomial is evaluated by Horner's rule and the result squared back up.
/// Accuracy is limited by double precision; `tol` below roughly 1e-13 is
/// honoured on the desk scales this crate works at (norms up to ~10).
pub fn expm(a: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    let n = a.require_square()?;
    if tol <= 0.0 {
        return Err(Error::Range(format!("expm tolerance must be positive, got {tol}")));
    }
    if n == 0 {
        return Ok(ComplexMatrix::zeros(0, 0));
    }

    let norm = one_norm(a);
    let mut squarings = 0u32;
    let mut scaled = a.clone();
    if norm > SCALE_TARGET {
        squarings = (norm / SCALE_TARGET).log2().ceil() as u32;
        scaled = a.scale(cr(1.0 / (1u64 << squarings.min(62)) as f64));
    }

    // Horner: T = I + B (I + B/2 (I + B/3 (...)))
    let id = ComplexMatrix::identity(n);
    let mut t = id.clone();
    for k in (1..=TAYLOR_ORDER).rev() {
        t = &id + &scaled.matmul(&t).scale(cr(1.0 / k as f64));
    }
    for _ in 0..squarings {
        t = t.matmul(&t);
    }
    Ok(t)
}

fn one_norm(a: &ComplexMatrix) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.cols() {
        let mut s = 0.0;
        for i in 0..a.rows() {
            s += a[(i, j)].norm();
        }
        best = best.max(s);
    }
    best
}
