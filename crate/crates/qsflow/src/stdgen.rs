//! Stochastic generators in standard block form, their validation and their
//! compressions to associated-semigroup generators.
//!
//! A generator is the linear map
//! `phi = [[tau, delta_dag], [delta, pi - iota]]` from a dense *-subalgebra
//! of B(h) into operators on `h (x) khat`, stored extensionally as a
//! superoperator matrix.


use crate::error::{Error, Result};
use crate::opcore::{
    ampliate_k, apply_superop, assemble_blocks, compress, cr, inner, project_onto_span,
    superop_from_fn, ComplexMatrix, SpaceDims, C64, I,
};

/// Default relative tolerance for Hermiticity, PSD and validation checks.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Span-membership tolerance for domain closure checks.
pub const SPAN_TOL: f64 = 1e-9;

/// The normalisation exponent `chi(z, w) = ||z||^2/2 + ||w||^2/2 - <z, w>`.
pub fn chi(z: &[C64], w: &[C64]) -> Result<C64> {
    if z.len() != w.len() {
        return Err(Error::Dimension(format!(
            "chi arguments must have equal length, got {} and {}",
            z.len(),
            w.len()
        )));
    }
    let nz: f64 = z.iter().map(|x| x.norm_sqr()).sum();
    let nw: f64 = w.iter().map(|x| x.norm_sqr()).sum();
    Ok(cr(0.5 * nz + 0.5 * nw) - inner(z, w))
}

/// Provenance of the standard-form property of a generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StandardFormStatus {
    /// Nothing is known; block operations that need standard form will refuse.
    Unchecked,
    /// Assembled from data that guarantees the structure relations.
    ByConstruction,
    /// Checked by [`validate_standard_form`] at the recorded tolerance.
    Validated(f64),
}

/// A linear map from B(h) into operators on `h (x) khat`, stored as a
/// superoperator matrix of shape `(d nhat)^2 x d^2`.
#[derive(Debug, Clone)]
pub struct GeneratorMap {
    dims: SpaceDims,
    action: ComplexMatrix,
    domain_basis: Option<Vec<ComplexMatrix>>,
    status: StandardFormStatus,
}

impl GeneratorMap {
    /// Builds the map columnwise from its action on matrix units.
    pub fn from_fn(dims: SpaceDims, f: impl FnMut(&ComplexMatrix) -> ComplexMatrix) -> Self {
        let m = dims.hkhat();
        let action = superop_from_fn(dims.d, m, m, f);
        Self {
            dims,
            action,
            domain_basis: None,
            status: StandardFormStatus::Unchecked,
        }
    }

    pub fn zero(dims: SpaceDims) -> Self {
        let m = dims.hkhat();
        Self {
            dims,
            action: ComplexMatrix::zeros(m * m, dims.d * dims.d),
            domain_basis: None,
            status: StandardFormStatus::ByConstruction,
        }
    }

    pub fn dims(&self) -> SpaceDims {
        self.dims
    }

    pub fn action(&self) -> &ComplexMatrix {
        &self.action
    }

    pub fn status(&self) -> StandardFormStatus {
        self.status
    }

    pub fn with_status(mut self, status: StandardFormStatus) -> Self {
        self.status = status;
        self
    }

    pub fn with_domain_basis(mut self, basis: Vec<ComplexMatrix>) -> Self {
        self.domain_basis = Some(basis);
        self
    }

    /// The declared domain basis, or the full matrix-unit basis of B(h).
    pub fn effective_basis(&self) -> Vec<ComplexMatrix> {
        match &self.domain_basis {
            Some(b) => b.clone(),
            None => matrix_units(self.dims.d),
        }
    }

    /// Evaluates `phi(x)` for a d x d argument.
    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let m = self.dims.hkhat();
        apply_superop(&self.action, x, m, m)
    }

    /// Splits `phi(x)` into the four blocks of the standard form.
    pub fn apply_blocks(&self, x: &ComplexMatrix) -> GeneratorBlocks {
        let d = self.dims.d;
        let nk = self.dims.hk();
        let full = self.apply(x);
        GeneratorBlocks {
            tau: full.block(0, 0, d, d),
            delta_dag: full.block(0, d, d, nk),
            delta: full.block(d, 0, nk, d),
            gauge: full.block(d, d, nk, nk),
        }
    }

    /// Max norm of the gauge block `pi - iota` over the matrix-unit basis.
    pub fn gauge_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for x in matrix_units(self.dims.d) {
            worst = worst.max(self.apply_blocks(&x).gauge.frobenius_norm());
        }
        worst
    }
}

/// The four blocks of an evaluated generator.
pub struct GeneratorBlocks {
    pub tau: ComplexMatrix,
    pub delta_dag: ComplexMatrix,
    pub delta: ComplexMatrix,
    /// `pi(x) - x (x) I_k`.
    pub gauge: ComplexMatrix,
}

impl GeneratorBlocks {
    pub fn pi(&self, x: &ComplexMatrix, dims: SpaceDims) -> ComplexMatrix {
        &self.gauge + &ampliate_k(x, dims)
    }
}

/// Matrix units `E_ij` of B(C^d), row index fastest.
pub fn matrix_units(d: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(d * d);
    for j in 0..d {
        for i in 0..d {
            let mut m = ComplexMatrix::zeros(d, d);
            m[(i, j)] = cr(1.0);
            out.push(m);
        }
    }
    out
}

/// Residuals of the standard-form structure relations.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub cohomology: f64,
    pub leibniz: f64,
    pub dagger: f64,
    pub pi_homomorphism: f64,
    pub pi_unitality: f64,
    pub star_linearity: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ValidationReport {
    pub fn max_residual(&self) -> f64 {
        self.cohomology
            .max(self.leibniz)
            .max(self.dagger)
            .max(self.pi_homomorphism)
            .max(self.pi_unitality)
            .max(self.star_linearity)
    }
}

/// The inner generator: `tau(x) = i[h,x] - t*t x / 2 +
/// t*(x (x) I)t - x t*t / 2`, `delta(x) = (x (x) I)t - t x`, `pi = iota`.
pub fn build_inner_generator(
    h: &ComplexMatrix,
    t: &ComplexMatrix,
    tol: f64,
) -> Result<GeneratorMap> {
    let d = h.require_square()?;
    let defect = h.hermitian_defect();
    let scale = h.max_abs().max(1.0);
    if defect > tol * scale {
        return Err(Error::NotHermitian { defect, tol: tol * scale });
    }
    if t.cols() != d || t.rows() % d != 0 {
        return Err(Error::Dimension(format!(
            "coupling operator must be (d n) x d with d = {d}, got {}x{}",
            t.rows(),
            t.cols()
        )));
    }
    let dims = SpaceDims::new(d, t.rows() / d)?;
    let tstar_t = t.adjoint().matmul(t);
    let h = h.clone();
    let t = t.clone();
    let gen = GeneratorMap::from_fn(dims, move |x| {
        let comm = &h.matmul(x) - &x.matmul(&h);
        let tau = &(&comm.scale(I) - &tstar_t.matmul(x).scale(cr(0.5)))
            + &(&t.adjoint().matmul(&ampliate_k(x, dims)).matmul(&t)
                - &x.matmul(&tstar_t).scale(cr(0.5)));
        let delta = &ampliate_k(x, dims).matmul(&t) - &t.matmul(x);
        let delta_dag_of_x = {
            let xstar = x.adjoint();
            (&ampliate_k(&xstar, dims).matmul(&t) - &t.matmul(&xstar)).adjoint()
        };
        assemble_blocks(
            &tau,
            &delta_dag_of_x,
            &delta,
            &ComplexMatrix::zeros(dims.hk(), dims.hk()),
            dims,
        )
    });
    Ok(gen.with_status(StandardFormStatus::ByConstruction))
}

/// Generator assembled from skew-symmetric derivations:
/// `delta(x) = sum_i c_i d_i(x) (x) |e_i>`, `tau = -1/2 sum |c_i|^2 d_i^2`.
///
/// Each derivation is given as a d^2 x d^2 superoperator and is checked to be
/// skew symmetric and Leibniz on the domain basis before assembly.
pub fn build_skew_derivation_generator(
    d: usize,
    derivs: &[ComplexMatrix],
    coeffs: &[C64],
    tol: f64,
) -> Result<GeneratorMap> {
    if derivs.len() != coeffs.len() {
        return Err(Error::Dimension(format!(
            "{} derivations but {} coefficients",
            derivs.len(),
            coeffs.len()
        )));
    }
    let basis = matrix_units(d);
    for (idx, dm) in derivs.iter().enumerate() {
        if dm.rows() != d * d || dm.cols() != d * d {
            return Err(Error::Dimension(format!(
                "derivation {idx} must be {0}x{0}, got {1}x{2}",
                d * d,
                dm.rows(),
                dm.cols()
            )));
        }
        let apply = |x: &ComplexMatrix| apply_superop(dm, x, d, d);
        for x in &basis {
            let skew = (&apply(&x.adjoint()).adjoint() + &apply(x)).max_abs();
            if skew > tol {
                return Err(Error::Precheck(format!(
                    "derivation {idx} is not skew symmetric (defect {skew:.3e})"
                )));
            }
            for y in &basis {
                let lhs = apply(&x.matmul(y));
                let rhs = &apply(x).matmul(y) + &x.matmul(&apply(y));
                let leib = (&lhs - &rhs).max_abs();
                if leib > tol {
                    return Err(Error::Precheck(format!(
                        "derivation {idx} fails the Leibniz rule (defect {leib:.3e})"
                    )));
                }
            }
        }
    }
    let dims = SpaceDims::new(d, derivs.len())?;
    let derivs = derivs.to_vec();
    let coeffs = coeffs.to_vec();
    let gen = GeneratorMap::from_fn(dims, move |x| {
        let mut tau = ComplexMatrix::zeros(d, d);
        let mut delta = ComplexMatrix::zeros(dims.hk(), d);
        let mut delta_dag = ComplexMatrix::zeros(d, dims.hk());
        for (i, (dm, ci)) in derivs.iter().zip(&coeffs).enumerate() {
            let dx = apply_superop(dm, x, d, d);
            let ddx = apply_superop(dm, &dx, d, d);
            tau = &tau - &ddx.scale(cr(0.5 * ci.norm_sqr()));
            delta.set_block(i * d, 0, &dx.scale(*ci));
            // delta_dag(x) = delta(x*)*, blockwise conj(c_i) d_i(x*)*
            let dxs = apply_superop(dm, &x.adjoint(), d, d);
            delta_dag.set_block(0, i * d, &dxs.adjoint().scale(ci.conj()));
        }
        assemble_blocks(
            &tau,
            &delta_dag,
            &delta,
            &ComplexMatrix::zeros(dims.hk(), dims.hk()),
            dims,
        )
    });
    Ok(gen.with_status(StandardFormStatus::ByConstruction))
}

/// Checks the Definition-4.2 structure relations on the domain basis.
pub fn validate_standard_form(phi: &GeneratorMap, tol: f64) -> Result<ValidationReport> {
    let dims = phi.dims();
    let d = dims.d;
    let basis = phi.effective_basis();

    // closure prechecks: adjoints and pairwise products must stay in the span
    for x in &basis {
        let (_, res) = project_onto_span(&basis, &x.adjoint());
        if res > SPAN_TOL {
            return Err(Error::DomainNotClosed {
                op: "adjoint",
                residual: res,
                tol: SPAN_TOL,
            });
        }
    }
    for x in &basis {
        for y in &basis {
            let (_, res) = project_onto_span(&basis, &x.matmul(y));
            if res > SPAN_TOL {
                return Err(Error::DomainNotClosed {
                    op: "product",
                    residual: res,
                    tol: SPAN_TOL,
                });
            }
        }
    }

    let blocks: Vec<GeneratorBlocks> = basis.iter().map(|x| phi.apply_blocks(x)).collect();

    let mut cohomology = 0.0f64;
    let mut leibniz = 0.0f64;
    let mut dagger = 0.0f64;
    let mut pi_hom = 0.0f64;
    let mut star = 0.0f64;

    for (x, bx) in basis.iter().zip(&blocks) {
        let xstar = x.adjoint();
        let full_star = phi.apply(&xstar);
        star = star.max((&full_star - &phi.apply(x).adjoint()).max_abs());
        let bxs = phi.apply_blocks(&xstar);
        dagger = dagger.max((&bx.delta_dag - &bxs.delta.adjoint()).max_abs());
        pi_hom = pi_hom.max((&bxs.pi(&xstar, dims) - &bx.pi(x, dims).adjoint()).max_abs());

        for (y, by) in basis.iter().zip(&blocks) {
            let xy = x.matmul(y);
            let bxy = phi.apply_blocks(&xy);
            let coh = &(&bxy.tau - &bx.tau.matmul(y)) - &(&x.matmul(&by.tau) + &bx.delta_dag.matmul(&by.delta));
            cohomology = cohomology.max(coh.max_abs());
            let leib = &(&bxy.delta - &bx.delta.matmul(y)) - &bx.pi(x, dims).matmul(&by.delta);
            leibniz = leibniz.max(leib.max_abs());
            let hom = &bxy.pi(&xy, dims) - &bx.pi(x, dims).matmul(&by.pi(y, dims));
            pi_hom = pi_hom.max(hom.max_abs());
        }
    }

    // unitality: represent 1 in the span and require pi(1) = I
    let (coeffs, unit_res) = project_onto_span(&basis, &ComplexMatrix::identity(d));
    let mut one = ComplexMatrix::zeros(d, d);
    for (cf, b) in coeffs.iter().zip(&basis) {
        one = &one + &b.scale(*cf);
    }
    let b1 = phi.apply_blocks(&one);
    let pi_unitality = unit_res.max(
        (&b1.pi(&one, dims) - &ComplexMatrix::identity(dims.hk())).max_abs(),
    );

    let report = ValidationReport {
        cohomology,
        leibniz,
        dagger,
        pi_homomorphism: pi_hom,
        pi_unitality,
        star_linearity: star,
        tolerance: tol,
        pass: false,
    };
    let pass = report.max_residual() <= tol;
    Ok(ValidationReport { pass, ..report })
}

/// The compressed map `x -> E^zhat phi(x) E_what` as a d^2 x d^2 superoperator.
pub fn compress_generator(phi: &GeneratorMap, z: &[C64], w: &[C64]) -> Result<ComplexMatrix> {
    let dims = phi.dims();
    if z.len() != dims.n || w.len() != dims.n {
        return Err(Error::Dimension(format!(
            "compression vectors must have length {}, got {} and {}",
            dims.n,
            z.len(),
            w.len()
        )));
    }
    let mut err = None;
    let out = superop_from_fn(dims.d, dims.d, dims.d, |x| {
        match compress(&phi.apply(x), z, w, dims) {
            Ok(m) => m,
            Err(e) => {
                err = Some(e);
                ComplexMatrix::zeros(dims.d, dims.d)
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Generator of the associated semigroup:
/// `x -> E^zhat phi(x) E_what - chi(z, w) x`.
pub fn semigroup_generator(phi: &GeneratorMap, z: &[C64], w: &[C64]) -> Result<ComplexMatrix> {
    let compressed = compress_generator(phi, z, w)?;
    let shift = chi(z, w)?;
    let d2 = phi.dims().d * phi.dims().d;
    Ok(&compressed - &ComplexMatrix::identity(d2).scale(shift))
}
