//! Multiplier coefficients, the q(F) contractivity calculus and the
//! Feynman-Kac perturbed-generator composition.

use crate::error::{Error, Result};
use crate::opcore::{
    ampliate_k, ampliate_khat, assemble_blocks, delta_op, operator_norm, psd_check, psd_sqrt,
    psd_sqrt_pinv, ComplexMatrix, SpaceDims, C64, I,
};
use crate::stdgen::{matrix_units, GeneratorMap, StandardFormStatus};
use crate::opcore::cr;

/// Truncation threshold for the pseudo-inverses used in witness recovery.
pub const PINV_CUT: f64 = 1e-10;

/// A multiplier coefficient `F` on `h (x) khat` with named blocks
/// `[[k, m], [l, w - I]]`.
#[derive(Debug, Clone)]
pub struct BlockCoefficient {
    pub dims: SpaceDims,
    /// d x d block.
    pub k: ComplexMatrix,
    /// d x (d n) block.
    pub m: ComplexMatrix,
    /// (d n) x d block.
    pub l: ComplexMatrix,
    /// (d n) x (d n) block; the assembled matrix carries `w - I`.
    pub w: ComplexMatrix,
}

impl BlockCoefficient {
    pub fn new(
        dims: SpaceDims,
        k: ComplexMatrix,
        m: ComplexMatrix,
        l: ComplexMatrix,
        w: ComplexMatrix,
    ) -> Result<Self> {
        let d = dims.d;
        let nk = dims.hk();
        let shapes = [
            (k.rows(), k.cols(), d, d, "k"),
            (m.rows(), m.cols(), d, nk, "m"),
            (l.rows(), l.cols(), nk, d, "l"),
            (w.rows(), w.cols(), nk, nk, "w"),
        ];
        for (r, c_, er, ec, name) in shapes {
            if r != er || c_ != ec {
                return Err(Error::Dimension(format!(
                    "block {name} must be {er}x{ec}, got {r}x{c_}"
                )));
            }
        }
        Ok(Self { dims, k, m, l, w })
    }

    pub fn zero(dims: SpaceDims) -> Self {
        Self {
            dims,
            k: ComplexMatrix::zeros(dims.d, dims.d),
            m: ComplexMatrix::zeros(dims.d, dims.hk()),
            l: ComplexMatrix::zeros(dims.hk(), dims.d),
            w: ComplexMatrix::identity(dims.hk()),
        }
    }

    /// Full matrix `[[k, m], [l, w - I]]` on `h (x) khat`.
    pub fn assemble(&self) -> ComplexMatrix {
        let wmi = &self.w - &ComplexMatrix::identity(self.dims.hk());
        assemble_blocks(&self.k, &self.m, &self.l, &wmi, self.dims)
    }

    /// Reads the blocks back off a full matrix on `h (x) khat`.
    pub fn disassemble(f: &ComplexMatrix, dims: SpaceDims) -> Result<Self> {
        let mdim = dims.hkhat();
        if f.rows() != mdim || f.cols() != mdim {
            return Err(Error::Dimension(format!(
                "expected {mdim}x{mdim} coefficient, got {}x{}",
                f.rows(),
                f.cols()
            )));
        }
        let d = dims.d;
        let nk = dims.hk();
        Ok(Self {
            dims,
            k: f.block(0, 0, d, d),
            m: f.block(0, d, d, nk),
            l: f.block(d, 0, nk, d),
            w: &f.block(d, d, nk, nk) + &ComplexMatrix::identity(nk),
        })
    }

    /// The adjoint coefficient `F*`, still in block form.
    pub fn star(&self) -> Self {
        Self {
            dims: self.dims,
            k: self.k.adjoint(),
            m: self.l.adjoint(),
            l: self.m.adjoint(),
            w: self.w.adjoint(),
        }
    }
}

/// Outcome of the two-route contractivity analysis of a coefficient.
#[derive(Debug, Clone)]
pub struct ContractivityReport {
    pub q_matrix: ComplexMatrix,
    pub is_contractive: bool,
    /// `q(F) = 0` within tolerance.
    pub is_isometric_coefficient: bool,
    /// `d = -(k + k* + l*l)`.
    pub d_witness: ComplexMatrix,
    /// Contraction `v` with `m = -l*w - d^{1/2} v (I - w*w)^{1/2}`, when the
    /// coefficient is contractive. Non-unique whenever `d` or `I - w*w` is
    /// singular; one witness is returned.
    pub v_witness: Option<ComplexMatrix>,
    pub v_unique: bool,
    pub min_eigenvalue_neg_q: f64,
    /// Residual of the reconstructed m-identity (0 when not contractive).
    pub m_identity_residual: f64,
}

/// `q(F) = F + F* + F* Delta F`.
pub fn q_of(f: &BlockCoefficient) -> ComplexMatrix {
    let full = f.assemble();
    let delta = delta_op(f.dims);
    let fs = full.adjoint();
    &(&full + &fs) + &fs.matmul(&delta).matmul(&full)
}

/// Classifies a coefficient as contractive/isometric, running both the
/// direct PSD route on `-q(F)` and the block-decomposition route and
/// insisting that they agree.
pub fn classify_contractive(f: &BlockCoefficient, tol: f64) -> Result<ContractivityReport> {
    let q = q_of(f);
    let scale = q.max_abs().max(1.0);
    let (neg_q_psd, min_eig) = psd_check(&(-&q), tol)?;
    let is_isometric = q.max_abs() <= tol * scale;

    // block route: w contraction, d >= 0, m-identity with a contraction v
    let nk = f.dims.hk();
    let d_witness = -&(&(&f.k + &f.k.adjoint()) + &f.l.adjoint().matmul(&f.l));
    let w_gram_gap = &ComplexMatrix::identity(nk) - &f.w.adjoint().matmul(&f.w);
    let w_contr = psd_check(&w_gram_gap, tol).map(|(ok, _)| ok).unwrap_or(false);
    let d_psd = psd_check(&d_witness, tol).map(|(ok, _)| ok).unwrap_or(false);

    let mut v_witness = None;
    let mut v_unique = false;
    let mut m_residual = 0.0;
    let mut block_route = false;
    if w_contr && d_psd {
        // m = -l*w - d^{1/2} v (I - w*w)^{1/2}; recover v by pseudo-inverses
        let target = -&(&f.m + &f.l.adjoint().matmul(&f.w));
        let d_half = psd_sqrt(&d_witness)?;
        let g_half = psd_sqrt(&w_gram_gap)?;
        let d_half_pinv = psd_sqrt_pinv(&d_witness, PINV_CUT)?;
        let g_half_pinv = psd_sqrt_pinv(&w_gram_gap, PINV_CUT)?;
        let v = d_half_pinv.matmul(&target).matmul(&g_half_pinv);
        let recon = d_half.matmul(&v).matmul(&g_half);
        m_residual = (&recon - &target).max_abs();
        let v_norm = operator_norm(&v);
        block_route = m_residual <= tol * scale.max(1.0) && v_norm <= 1.0 + tol;
        if block_route {
            let d_rank_full = psd_check(&d_witness, tol)
                .map(|(_, mn)| mn > PINV_CUT)
                .unwrap_or(false);
            let g_rank_full = psd_check(&w_gram_gap, tol)
                .map(|(_, mn)| mn > PINV_CUT)
                .unwrap_or(false);
            v_unique = d_rank_full && g_rank_full;
            v_witness = Some(v);
        }
    }

    if neg_q_psd != block_route {
        return Err(Error::Internal(format!(
            "contractivity routes disagree: psd says {neg_q_psd}, blocks say {block_route} \
             (m-residual {m_residual:.3e}, min eig {min_eig:.3e})"
        )));
    }

    Ok(ContractivityReport {
        q_matrix: q,
        is_contractive: neg_q_psd,
        is_isometric_coefficient: is_isometric,
        d_witness,
        v_witness,
        v_unique,
        min_eigenvalue_neg_q: min_eig,
        m_identity_residual: m_residual,
    })
}

/// Builds the isometric coefficient `k = i h - l*l / 2`, `m = -l*w` for an
/// isometry `w`; the result has `q(F) = 0`.
pub fn make_isometric_coefficient(
    h: &ComplexMatrix,
    l: &ComplexMatrix,
    w: &ComplexMatrix,
    tol: f64,
) -> Result<BlockCoefficient> {
    let d = h.require_square()?;
    let defect = h.hermitian_defect();
    if defect > tol * h.max_abs().max(1.0) {
        return Err(Error::NotHermitian { defect, tol });
    }
    if l.cols() != d || l.rows() % d != 0 {
        return Err(Error::Dimension(format!(
            "l must be (d n) x d with d = {d}, got {}x{}",
            l.rows(),
            l.cols()
        )));
    }
    let dims = SpaceDims::new(d, l.rows() / d)?;
    let nk = dims.hk();
    if w.rows() != nk || w.cols() != nk {
        return Err(Error::Dimension(format!(
            "w must be {nk}x{nk}, got {}x{}",
            w.rows(),
            w.cols()
        )));
    }
    let iso_defect = (&w.adjoint().matmul(w) - &ComplexMatrix::identity(nk)).max_abs();
    if iso_defect > tol * w.max_abs().max(1.0) {
        return Err(Error::NotIsometry {
            defect: iso_defect,
            tol,
        });
    }
    let k = &h.scale(I) - &l.adjoint().matmul(l).scale(cr(0.5));
    let m = -&l.adjoint().matmul(w);
    BlockCoefficient::new(dims, k, m, l.clone(), w.clone())
}

/// The perturbed generator of Feynman-Kac conjugation,
/// `psi(x) = (I + Delta F)* phi(x) (I + Delta G) + F*(x (x) I) +
/// F* Delta (x (x) I) Delta G + (x (x) I) G`.
pub fn perturbed_generator(
    phi: &GeneratorMap,
    f: &BlockCoefficient,
    g: &BlockCoefficient,
) -> Result<GeneratorMap> {
    let dims = phi.dims();
    if f.dims != dims || g.dims != dims {
        return Err(Error::Dimension(format!(
            "coefficient dims {:?} / {:?} do not match generator dims {:?}",
            f.dims, g.dims, dims
        )));
    }
    let delta = delta_op(dims);
    let id = ComplexMatrix::identity(dims.hkhat());
    let ff = f.assemble();
    let gg = g.assemble();
    let left = (&id + &delta.matmul(&ff)).adjoint();
    let right = &id + &delta.matmul(&gg);
    let fs = ff.adjoint();
    let fs_delta = fs.matmul(&delta);
    let delta_g = delta.matmul(&gg);

    let out = GeneratorMap::from_fn(dims, |x| {
        let amp = ampliate_khat(x, dims);
        let term1 = left.matmul(&phi.apply(x)).matmul(&right);
        let term2 = fs.matmul(&amp);
        let term3 = fs_delta.matmul(&amp).matmul(&delta_g);
        let term4 = amp.matmul(&gg);
        &(&term1 + &term2) + &(&term3 + &term4)
    });
    Ok(out)
}

/// The same map assembled entry-by-entry from the detailed 2x2 block display;
/// requires a generator whose standard form has been established.
pub fn perturbed_generator_blocks(
    phi: &GeneratorMap,
    f: &BlockCoefficient,
    g: &BlockCoefficient,
) -> Result<GeneratorMap> {
    if phi.status() == StandardFormStatus::Unchecked {
        return Err(Error::NotStandardForm);
    }
    let dims = phi.dims();
    if f.dims != dims || g.dims != dims {
        return Err(Error::Dimension("coefficient dims mismatch".into()));
    }
    let lf_s = f.l.adjoint();
    let wf_s = f.w.adjoint();
    let mf_s = f.m.adjoint();
    let kf_s = f.k.adjoint();

    let out = GeneratorMap::from_fn(dims, |x| {
        let b = phi.apply_blocks(x);
        let pi = b.pi(x, dims);
        let top_left = &(&(&b.tau + &lf_s.matmul(&b.delta)) + &lf_s.matmul(&pi).matmul(&g.l))
            + &(&(&b.delta_dag.matmul(&g.l) + &kf_s.matmul(x)) + &x.matmul(&g.k));
        let top_right = &(&b.delta_dag.matmul(&g.w) + &lf_s.matmul(&pi).matmul(&g.w))
            + &x.matmul(&g.m);
        let bottom_left = &(&wf_s.matmul(&b.delta) + &wf_s.matmul(&pi).matmul(&g.l))
            + &mf_s.matmul(x);
        let bottom_right = &wf_s.matmul(&pi).matmul(&g.w) - &ampliate_k(x, dims);
        assemble_blocks(&top_left, &top_right, &bottom_left, &bottom_right, dims)
    });
    Ok(out)
}

/// The Weyl coefficient `F = I_h (x) C` with
/// `C = [[i h - ||c||^2 / 2, -<U* c|], [|c>, U - I]]`.
pub fn weyl_coefficient(
    h: f64,
    c_vec: &[C64],
    u: &ComplexMatrix,
    d: usize,
    tol: f64,
) -> Result<BlockCoefficient> {
    let n = c_vec.len();
    if u.rows() != n || u.cols() != n {
        return Err(Error::Dimension(format!(
            "U must be {n}x{n}, got {}x{}",
            u.rows(),
            u.cols()
        )));
    }
    let defect = (&u.adjoint().matmul(u) - &ComplexMatrix::identity(n)).max_abs();
    if defect > tol * u.max_abs().max(1.0) {
        return Err(Error::NotIsometry { defect, tol });
    }
    let dims = SpaceDims::new(d, n)?;
    let norm2: f64 = c_vec.iter().map(|z| z.norm_sqr()).sum();
    let id = ComplexMatrix::identity(d);
    let k = id.scale(C64::new(0.0, h) - cr(0.5 * norm2));
    let ustar_c = u.adjoint().matvec(c_vec);
    // -<U*c| as a row over k, ampliated over h
    let mut row = ComplexMatrix::zeros(1, n);
    for (j, z) in ustar_c.iter().enumerate() {
        row[(0, j)] = -z.conj();
    }
    let m = row.kron(&id);
    let l = ComplexMatrix::column(c_vec).kron(&id);
    let w = u.kron(&id);
    BlockCoefficient::new(dims, k, m, l, w)
}

/// Residual of the Weyl shift identity
/// `psi^{zhat}_{what} = phi^{chat+Uz}_{chat+Uw}` for a gauge-free generator.
pub fn weyl_shift_check(
    phi: &GeneratorMap,
    h: f64,
    c_vec: &[C64],
    u: &ComplexMatrix,
    z: &[C64],
    w: &[C64],
    tol: f64,
) -> Result<f64> {
    let gauge = phi.gauge_defect();
    if gauge > tol.max(1e-9) {
        return Err(Error::Precheck(format!(
            "shift identity needs a gauge-free generator; gauge block norm {gauge:.3e}"
        )));
    }
    let dims = phi.dims();
    let f = weyl_coefficient(h, c_vec, u, dims.d, tol)?;
    let psi = perturbed_generator(phi, &f, &f)?;
    let lhs = crate::stdgen::compress_generator(&psi, z, w)?;
    let shift = |v: &[C64]| -> Vec<C64> {
        let uv = u.matvec(v);
        c_vec.iter().zip(&uv).map(|(a, b)| a + b).collect()
    };
    let rhs = crate::stdgen::compress_generator(phi, &shift(z), &shift(w))?;
    Ok((&lhs - &rhs).max_abs())
}

/// Max residual of `w*(x (x) I_k)w - x (x) I_k` over the given basis.
pub fn gauge_free_check(w: &ComplexMatrix, basis: &[ComplexMatrix], dims: SpaceDims) -> f64 {
    let mut worst = 0.0f64;
    for x in basis {
        let amp = ampliate_k(x, dims);
        let res = (&w.adjoint().matmul(&amp).matmul(w) - &amp).max_abs();
        worst = worst.max(res);
    }
    worst
}

/// Convenience basis for [`gauge_free_check`].
pub fn full_basis(d: usize) -> Vec<ComplexMatrix> {
    matrix_units(d)
}

/// Checks `q(F) = 0` and `q(F*) = 0`, the hypotheses under which perturbation
/// preserves standard form.
pub fn is_doubly_isometric(f: &BlockCoefficient, tol: f64) -> bool {
    let scale = f.assemble().max_abs().max(1.0);
    q_of(f).max_abs() <= tol * scale && q_of(&f.star()).max_abs() <= tol * scale
}
