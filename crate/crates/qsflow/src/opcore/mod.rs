//! Complex dense linear algebra, tensor embeddings and the compression
//! operators the rest of the crate is phrased in.
//!
//! # Index conventions
//!
//! These are fixed, not configurable:
//!
//! * The extended multiplicity space `khat = C (+) k` is ordered with the
//!   vacuum direction first: basis `(e0hat, e1, ..., en)`.
//! * On `h (x) khat` the multiplicity index is the slow (outer) tensor index:
//!   the coordinate of `u (x) zeta` sits at `kappa * d + i` for h-index `i`
//!   and khat-index `kappa`. Operators on the tensor space therefore look
//!   like `kron(op_on_khat, op_on_h)`, and the four blocks of a multiplier
//!   coefficient are contiguous sub-matrices.
//! * Superoperators act on column-stacked vectorisations:
//!   `vec(A X B) = kron(B^T, A) vec(X)`.

pub mod eigen;
pub mod expm;
pub mod matrix;
pub mod random;

pub use eigen::{
    frobenius_inner, hermitian_eigen, operator_norm, project_onto_span, psd_check, psd_sqrt,
    psd_sqrt_pinv, solve_hermitian_pinv, HermitianEigen,
};
pub use expm::expm;
pub use matrix::{c, cr, inner, vec_norm, ComplexMatrix, C64, I};

use crate::error::{Error, Result};

/// Dimensions of the initial space `h` and multiplicity space `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceDims {
    /// Dimension of the initial space h.
    pub d: usize,
    /// Dimension of the multiplicity space k.
    pub n: usize,
}

impl SpaceDims {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Dimension("initial space must have d >= 1".into()));
        }
        Ok(Self { d, n })
    }

    /// Dimension of the extended multiplicity space khat = C (+) k.
    pub fn nhat(&self) -> usize {
        self.n + 1
    }

    /// Dimension of h (x) k.
    pub fn hk(&self) -> usize {
        self.d * self.n
    }

    /// Dimension of h (x) khat.
    pub fn hkhat(&self) -> usize {
        self.d * self.nhat()
    }
}

/// The inclusion `E_zhat : h -> h (x) khat`, `u -> u (x) zhat` with
/// `zhat = (1, z)`.
pub fn embed_ehat(z: &[C64], dims: SpaceDims) -> Result<ComplexMatrix> {
    if z.len() != dims.n {
        return Err(Error::Dimension(format!(
            "expected multiplicity vector of length {}, got {}",
            dims.n,
            z.len()
        )));
    }
    let mut zhat = Vec::with_capacity(dims.nhat());
    zhat.push(cr(1.0));
    zhat.extend_from_slice(z);
    Ok(ComplexMatrix::column(&zhat).kron(&ComplexMatrix::identity(dims.d)))
}

/// Compression `E^zhat T E_what` of an operator on `h (x) khat` down to `h`.
pub fn compress(t: &ComplexMatrix, z: &[C64], w: &[C64], dims: SpaceDims) -> Result<ComplexMatrix> {
    let m = dims.hkhat();
    if t.rows() != m || t.cols() != m {
        return Err(Error::Dimension(format!(
            "expected {m}x{m} operator on h(x)khat, got {}x{}",
            t.rows(),
            t.cols()
        )));
    }
    let ez = embed_ehat(z, dims)?;
    let ew = embed_ehat(w, dims)?;
    Ok(ez.adjoint().matmul(t).matmul(&ew))
}

/// The gauge projection `Delta = I_h (x) P_k` on `h (x) khat`.
pub fn delta_op(dims: SpaceDims) -> ComplexMatrix {
    let mut p = ComplexMatrix::zeros(dims.nhat(), dims.nhat());
    for kappa in 1..dims.nhat() {
        p[(kappa, kappa)] = cr(1.0);
    }
    p.kron(&ComplexMatrix::identity(dims.d))
}

/// Ampliation `x (x) I_k` of a d x d operator to `h (x) k`.
pub fn ampliate_k(x: &ComplexMatrix, dims: SpaceDims) -> ComplexMatrix {
    ComplexMatrix::identity(dims.n).kron(x)
}

/// Ampliation `x (x) I_khat` of a d x d operator to `h (x) khat`.
pub fn ampliate_khat(x: &ComplexMatrix, dims: SpaceDims) -> ComplexMatrix {
    ComplexMatrix::identity(dims.nhat()).kron(x)
}

/// Assembles `[[a, b], [c, d]]` over the vacuum/noise split of `h (x) khat`.
pub fn assemble_blocks(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    c_blk: &ComplexMatrix,
    d_blk: &ComplexMatrix,
    dims: SpaceDims,
) -> ComplexMatrix {
    let d = dims.d;
    let nk = dims.hk();
    assert!(a.rows() == d && a.cols() == d);
    assert!(b.rows() == d && b.cols() == nk);
    assert!(c_blk.rows() == nk && c_blk.cols() == d);
    assert!(d_blk.rows() == nk && d_blk.cols() == nk);
    let mut full = ComplexMatrix::zeros(dims.hkhat(), dims.hkhat());
    full.set_block(0, 0, a);
    full.set_block(0, d, b);
    full.set_block(d, 0, c_blk);
    full.set_block(d, d, d_blk);
    full
}

/// Matrix of the superoperator `x -> f(x)` on B(C^d), built column by column
/// in the vec convention. `f` maps d x d inputs to `out_rows` x `out_cols`.
pub fn superop_from_fn(
    d: usize,
    out_rows: usize,
    out_cols: usize,
    mut f: impl FnMut(&ComplexMatrix) -> ComplexMatrix,
) -> ComplexMatrix {
    let mut action = ComplexMatrix::zeros(out_rows * out_cols, d * d);
    for col in 0..d * d {
        let (j, i) = (col / d, col % d);
        let mut basis = ComplexMatrix::zeros(d, d);
        basis[(i, j)] = cr(1.0);
        let image = f(&basis);
        assert!(image.rows() == out_rows && image.cols() == out_cols);
        let vec = image.vec();
        for (row, z) in vec.iter().enumerate() {
            action[(row, col)] = *z;
        }
    }
    action
}

/// Applies a vec-convention superoperator matrix to a d x d argument.
pub fn apply_superop(action: &ComplexMatrix, x: &ComplexMatrix, out_rows: usize, out_cols: usize) -> ComplexMatrix {
    let v = action.matvec(&x.vec());
    ComplexMatrix::unvec(&v, out_rows, out_cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn randv(n: usize, rng: &mut impl Rng) -> Vec<C64> {
        (0..n)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn embed_zero_is_vacuum_inclusion() {
        let dims = SpaceDims::new(2, 2).unwrap();
        let e = embed_ehat(&[cr(0.0), cr(0.0)], dims).unwrap();
        assert_eq!(e.rows(), 6);
        assert_eq!(e.cols(), 2);
        assert!((&e.block(0, 0, 2, 2) - &ComplexMatrix::identity(2)).max_abs() == 0.0);
        assert!(e.block(2, 0, 4, 2).max_abs() == 0.0);
        // isometry onto the e0hat block
        let g = e.adjoint().matmul(&e);
        assert!((&g - &ComplexMatrix::identity(2)).max_abs() == 0.0);
    }

    #[test]
    fn embed_d1_n1_concrete() {
        let dims = SpaceDims::new(1, 1).unwrap();
        let e = embed_ehat(&[cr(2.0)], dims).unwrap();
        assert_eq!((e[(0, 0)], e[(1, 0)]), (cr(1.0), cr(2.0)));
    }

    #[test]
    fn embed_inner_product_identity() {
        // E^zhat E_what = (1 + <z,w>) I
        let dims = SpaceDims::new(3, 2).unwrap();
        let mut r = rng(31);
        for _ in 0..10 {
            let z = randv(2, &mut r);
            let w = randv(2, &mut r);
            let ez = embed_ehat(&z, dims).unwrap();
            let ew = embed_ehat(&w, dims).unwrap();
            let prod = ez.adjoint().matmul(&ew);
            let expected = ComplexMatrix::identity(3).scale(cr(1.0) + inner(&z, &w));
            assert!((&prod - &expected).max_abs() < 1e-14);
        }
    }

    #[test]
    fn compress_identity_and_simple_tensor() {
        let dims = SpaceDims::new(2, 2).unwrap();
        let mut r = rng(37);
        let z = randv(2, &mut r);
        let w = randv(2, &mut r);

        let t = ComplexMatrix::identity(dims.hkhat());
        let got = compress(&t, &z, &w, dims).unwrap();
        let expected = ComplexMatrix::identity(2).scale(cr(1.0) + inner(&z, &w));
        assert!((&got - &expected).max_abs() < 1e-14);

        // T = B (x) x in the multiplicity-slow layout is kron(B, x);
        // its compression is <zhat, B what> x
        let x = ComplexMatrix::from_fn(2, 2, |i, j| c(i as f64, j as f64 + 0.5));
        let b = ComplexMatrix::from_fn(3, 3, |i, j| c(0.3 * i as f64 - 0.1, 0.2 * j as f64));
        let t = b.kron(&x);
        let mut zhat = vec![cr(1.0)];
        zhat.extend_from_slice(&z);
        let mut what = vec![cr(1.0)];
        what.extend_from_slice(&w);
        let scalar = inner(&zhat, &b.matvec(&what));
        let got = compress(&t, &z, &w, dims).unwrap();
        assert!((&got - &x.scale(scalar)).max_abs() < 1e-13);
    }

    #[test]
    fn compress_matches_dense_triple_product() {
        let dims = SpaceDims::new(2, 3).unwrap();
        let mut r = rng(41);
        for _ in 0..5 {
            let t = ComplexMatrix::from_fn(dims.hkhat(), dims.hkhat(), |_, _| {
                c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
            });
            let z = randv(3, &mut r);
            let w = randv(3, &mut r);
            let got = compress(&t, &z, &w, dims).unwrap();
            // oracle: explicit loop over the index convention
            let mut want = ComplexMatrix::zeros(2, 2);
            let mut zhat = vec![cr(1.0)];
            zhat.extend_from_slice(&z);
            let mut what = vec![cr(1.0)];
            what.extend_from_slice(&w);
            for i in 0..2 {
                for j in 0..2 {
                    let mut s = C64::new(0.0, 0.0);
                    for kp in 0..4 {
                        for kq in 0..4 {
                            s += zhat[kp].conj() * t[(kp * 2 + i, kq * 2 + j)] * what[kq];
                        }
                    }
                    want[(i, j)] = s;
                }
            }
            assert!((&got - &want).max_abs() < 1e-13);
        }
    }

    #[test]
    fn compress_adjoint_symmetry() {
        // compress(T, z, w)^* = compress(T^*, w, z)
        let dims = SpaceDims::new(3, 2).unwrap();
        let mut r = rng(43);
        let t = ComplexMatrix::from_fn(dims.hkhat(), dims.hkhat(), |_, _| {
            c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
        });
        let z = randv(2, &mut r);
        let w = randv(2, &mut r);
        let lhs = compress(&t, &z, &w, dims).unwrap().adjoint();
        let rhs = compress(&t.adjoint(), &w, &z, dims).unwrap();
        assert!((&lhs - &rhs).max_abs() < 1e-13);
    }

    #[test]
    fn delta_is_projection_with_expected_compressions() {
        let dims = SpaceDims::new(2, 0).unwrap();
        assert!(delta_op(dims).max_abs() == 0.0);

        let dims = SpaceDims::new(2, 2).unwrap();
        let delta = delta_op(dims);
        assert!((&delta.matmul(&delta) - &delta).max_abs() == 0.0);
        assert!((&delta.adjoint() - &delta).max_abs() == 0.0);

        let mut r = rng(47);
        let z = randv(2, &mut r);
        let w = randv(2, &mut r);
        let got = compress(&delta, &z, &w, dims).unwrap();
        let expected = ComplexMatrix::identity(2).scale(inner(&z, &w));
        assert!((&got - &expected).max_abs() < 1e-14);
    }

    #[test]
    fn superop_round_trip() {
        let a = ComplexMatrix::from_fn(2, 2, |i, j| c(i as f64 + 1.0, j as f64));
        let b = ComplexMatrix::from_fn(2, 2, |i, j| c(0.5 * j as f64, i as f64 - 0.5));
        let action = superop_from_fn(2, 2, 2, |x| a.matmul(x).matmul(&b));
        let x = ComplexMatrix::from_fn(2, 2, |i, j| c(0.1 + i as f64, 0.7 * j as f64));
        let via_superop = apply_superop(&action, &x, 2, 2);
        let direct = a.matmul(&x).matmul(&b);
        assert!((&via_superop - &direct).max_abs() < 1e-14);
    }
}
