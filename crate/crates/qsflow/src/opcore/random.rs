//! Seeded random matrices for scenario generation and tests.

use rand::Rng;

use super::expm::expm;
use super::matrix::{c, cr, ComplexMatrix, C64, I};

/// Uniform complex entries in the square `[-scale, scale]^2`.
pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
    })
}

pub fn random_vector(n: usize, scale: f64, rng: &mut impl Rng) -> Vec<C64> {
    (0..n)
        .map(|_| c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)))
        .collect()
}

pub fn random_hermitian(d: usize, scale: f64, rng: &mut impl Rng) -> ComplexMatrix {
    random_matrix(d, d, scale, rng).hermitian_part()
}

/// Haar-ish random unitary as `exp(i H)` of a random Hermitian.
pub fn random_unitary(d: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let h = random_hermitian(d, 1.0, rng);
    expm(&h.scale(I), 1e-13).expect("square input")
}

/// Random PSD matrix `A* A`, rescaled to unit spectral-ish norm.
pub fn random_psd(d: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let a = random_matrix(d, d, 1.0, rng);
    let g = a.adjoint().matmul(&a);
    let s = g.max_abs().max(1e-12);
    g.scale(cr(1.0 / s))
}
