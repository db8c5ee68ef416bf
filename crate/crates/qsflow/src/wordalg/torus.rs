//! Symbolic noncommutative torus: monomial calculus, compressed generator
//! scalars, cocycle elements and the sum-of-squares Laplacian identity.

use std::collections::BTreeMap;

use crate::cocycle::{common_refinement, StepFunction};
use crate::error::{Error, Result};
use crate::opcore::{cr, C64};
use crate::stdgen::chi;

/// Sign of the exponent in the monomial product rule
/// `(U^m V^n)(U^p V^q) = lambda^(SIGN n p) U^(m+p) V^(n+q)`,
/// pinned by the l2(Z^2) window representation
/// (`(U u)_{m,n} = u_{m+1,n}`, `(V u)_{m,n} = lambda^m u_{m,n+1}`).
pub const MUL_PHASE_SIGN: i64 = -1;

/// The deformation parameter, kept exact for rational angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    /// `exp(2 pi i num / den)` turns; powers reduce mod `den`.
    RationalTurns { num: i64, den: i64 },
    /// Angle in radians.
    Angle(f64),
}

impl Lambda {
    pub fn rational(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Range("rational angle needs a nonzero denominator".into()));
        }
        Ok(Lambda::RationalTurns { num, den })
    }

    pub fn value(&self) -> C64 {
        self.power(1)
    }

    /// `lambda^k` without phase drift for rational angles.
    pub fn power(&self, k: i64) -> C64 {
        match *self {
            Lambda::RationalTurns { num, den } => {
                let e = (k as i128 * num as i128).rem_euclid(den as i128) as f64;
                let theta = 2.0 * std::f64::consts::PI * e / den as f64;
                C64::new(theta.cos(), theta.sin())
            }
            Lambda::Angle(theta) => {
                let full = theta * k as f64 % (2.0 * std::f64::consts::PI);
                C64::new(full.cos(), full.sin())
            }
        }
    }
}

/// An element of the torus algebra: finitely many monomials `U^m V^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusElement {
    pub lambda: Lambda,
    coeffs: BTreeMap<(i64, i64), C64>,
}

impl TorusElement {
    pub fn zero(lambda: Lambda) -> Self {
        Self {
            lambda,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn monomial(lambda: Lambda, m: i64, n: i64, coeff: C64) -> Self {
        let mut coeffs = BTreeMap::new();
        if coeff != C64::new(0.0, 0.0) {
            coeffs.insert((m, n), coeff);
        }
        Self { lambda, coeffs }
    }

    pub fn one(lambda: Lambda) -> Self {
        Self::monomial(lambda, 0, 0, cr(1.0))
    }

    pub fn u(lambda: Lambda) -> Self {
        Self::monomial(lambda, 1, 0, cr(1.0))
    }

    pub fn v(lambda: Lambda) -> Self {
        Self::monomial(lambda, 0, 1, cr(1.0))
    }

    pub fn coeff(&self, m: i64, n: i64) -> C64 {
        self.coeffs.get(&(m, n)).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(i64, i64), &C64)> {
        self.coeffs.iter()
    }

    pub fn support(&self) -> Vec<(i64, i64)> {
        self.coeffs.keys().copied().collect()
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.values().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn add_term(&mut self, key: (i64, i64), coeff: C64) {
        use std::collections::btree_map::Entry;
        let zero = C64::new(0.0, 0.0);
        match self.coeffs.entry(key) {
            Entry::Vacant(v) => {
                if coeff != zero {
                    v.insert(coeff);
                }
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if *o.get() == zero {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &TorusElement) -> Result<TorusElement> {
        self.check_lambda(other)?;
        let mut out = self.clone();
        for (k, cf) in other.terms() {
            out.add_term(*k, *cf);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &TorusElement) -> Result<TorusElement> {
        self.add(&other.scale(cr(-1.0)))
    }

    pub fn scale(&self, z: C64) -> TorusElement {
        if z == C64::new(0.0, 0.0) {
            return TorusElement::zero(self.lambda);
        }
        TorusElement {
            lambda: self.lambda,
            coeffs: self.coeffs.iter().map(|(k, cf)| (*k, cf * z)).collect(),
        }
    }

    fn check_lambda(&self, other: &TorusElement) -> Result<()> {
        if self.lambda != other.lambda {
            return Err(Error::LambdaMismatch(format!(
                "{:?} vs {:?}",
                self.lambda, other.lambda
            )));
        }
        Ok(())
    }

    /// Self-adjointness defect `max |x - x*|` coefficientwise.
    pub fn self_adjoint_defect(&self) -> f64 {
        self.sub(&self.adjoint()).map(|d| d.max_coeff_norm()).unwrap_or(f64::INFINITY)
    }
}

/// Bilinear extension of the monomial rule
/// `(U^m V^n)(U^p V^q) = lambda^(-n p) U^(m+p) V^(n+q)`.
pub fn torus_mul(a: &TorusElement, b: &TorusElement) -> Result<TorusElement> {
    a.check_lambda(b)?;
    let mut out = TorusElement::zero(a.lambda);
    for ((m, n), ca) in a.terms() {
        for ((p, q), cb) in b.terms() {
            let phase = a.lambda.power(MUL_PHASE_SIGN * n * p);
            out.add_term((m + p, n + q), ca * cb * phase);
        }
    }
    Ok(out)
}

impl TorusElement {
    /// `(U^m V^n)* = lambda^(SIGN m n) U^(-m) V^(-n)` with conjugated
    /// coefficients; the phase follows from the product rule.
    pub fn adjoint(&self) -> TorusElement {
        let mut out = TorusElement::zero(self.lambda);
        for ((m, n), cf) in self.terms() {
            let phase = self.lambda.power(MUL_PHASE_SIGN * m * n);
            out.add_term((-m, -n), cf.conj() * phase);
        }
        out
    }
}

/// The word-counting derivations of the torus: `d_1` multiplies by `m`,
/// `d_2` by `n`.
pub fn torus_derivation(x: &TorusElement, j: usize) -> Result<TorusElement> {
    if j != 1 && j != 2 {
        return Err(Error::Range(format!("torus derivations are d_1 and d_2, got d_{j}")));
    }
    let mut out = TorusElement::zero(x.lambda);
    for ((m, n), cf) in x.terms() {
        let count = if j == 1 { *m } else { *n };
        if count != 0 {
            out.add_term((*m, *n), cf * cr(count as f64));
        }
    }
    Ok(out)
}

/// The scalar `s` with `phi^{zhat}_{what}(U^m V^n) = s U^m V^n` for the
/// gauge-free flow generator with coefficients `c1, c2`:
/// `s = -(|c1|^2 m^2 + |c2|^2 n^2)/2 + (conj(z1) c1 - w1 conj(c1)) m
///      + (conj(z2) c2 - w2 conj(c2)) n`.
pub fn torus_compressed_scalar(
    c1: C64,
    c2: C64,
    z: &[C64; 2],
    w: &[C64; 2],
    m: i64,
    n: i64,
) -> C64 {
    let mf = m as f64;
    let nf = n as f64;
    let quad = -0.5 * (c1.norm_sqr() * mf * mf + c2.norm_sqr() * nf * nf);
    let lin1 = (z[0].conj() * c1 - w[0] * c1.conj()) * cr(mf);
    let lin2 = (z[1].conj() * c2 - w[1] * c2.conj()) * cr(nf);
    cr(quad) + lin1 + lin2
}

/// Cocycle matrix element on one monomial: the product over refined segments
/// of `exp(dur (s(z, w; m, n) - chi(z, w)))`.
pub fn torus_cocycle_element(
    c1: C64,
    c2: C64,
    f: &StepFunction,
    g: &StepFunction,
    t: f64,
    m: i64,
    n: i64,
) -> Result<C64> {
    if f.multiplicity() != 2 || g.multiplicity() != 2 {
        return Err(Error::Dimension(
            "torus cocycle elements need multiplicity-2 step functions".into(),
        ));
    }
    if t < 0.0 || t > f.total_time() + 1e-12 || t > g.total_time() + 1e-12 {
        return Err(Error::Range(format!("time {t} out of range")));
    }
    let mut exponent = C64::new(0.0, 0.0);
    for (dur, zv, wv) in common_refinement(f, g, t) {
        let z = [zv[0], zv[1]];
        let w = [wv[0], wv[1]];
        let s = torus_compressed_scalar(c1, c2, &z, &w, m, n);
        exponent += (s - chi(&zv, &wv)?) * cr(dur);
    }
    Ok(exponent.exp())
}

/// The corrected scalar part of the gauge-free perturbation,
/// `k = -1/2 sum_j (beta_j d_j(n_j) + n_j^2)`.
pub fn laplacian_k(betas: &[f64; 2], n_elems: &[TorusElement; 2]) -> Result<TorusElement> {
    let lambda = n_elems[0].lambda;
    let mut k = TorusElement::zero(lambda);
    for j in 0..2 {
        let nj = &n_elems[j];
        let dj_nj = torus_derivation(nj, j + 1)?;
        let nj_sq = torus_mul(nj, nj)?;
        k = k.add(&dj_nj.scale(cr(betas[j])).add(&nj_sq)?.scale(cr(-0.5)))?;
    }
    Ok(k)
}

/// Max coefficient residual between the perturbed semigroup generator
/// `tau'` transcribed from the block formula and the sum of squares
/// `-1/2 sum_j (beta_j d_j + d_{n_j})^2`, evaluated on all monomials with
/// `|m|, |n| <= degree_bound` and the supplied scalar part `k`.
pub fn gauge_perturb_residual(
    betas: &[f64; 2],
    n_elems: &[TorusElement; 2],
    k: &TorusElement,
    degree_bound: i64,
) -> Result<f64> {
    let lambda = n_elems[0].lambda;
    let c: [C64; 2] = [C64::new(0.0, betas[0]), C64::new(0.0, betas[1])];
    let l: Vec<TorusElement> = n_elems.iter().map(|nj| nj.scale(C64::new(0.0, 1.0))).collect();
    let k_star = k.adjoint();

    let mut worst = 0.0f64;
    for m in -degree_bound..=degree_bound {
        for n in -degree_bound..=degree_bound {
            let x = TorusElement::monomial(lambda, m, n, cr(1.0));

            // route 1: tau'(x) = tau(x) + l* delta(x) + l*(x)l + delta_dag(x) l
            //          + k* x + x k, all expanded symbolically
            let mut route1 = TorusElement::zero(lambda);
            for j in 0..2 {
                let djx = torus_derivation(&x, j + 1)?;
                let ddjx = torus_derivation(&djx, j + 1)?;
                // tau = -1/2 sum |c_j|^2 d_j^2
                route1 = route1.add(&ddjx.scale(cr(-0.5 * c[j].norm_sqr())))?;
                // l_j* (c_j d_j(x))
                route1 = route1.add(&torus_mul(&l[j].adjoint(), &djx.scale(c[j]))?)?;
                // l_j* x l_j
                route1 = route1.add(&torus_mul(&torus_mul(&l[j].adjoint(), &x)?, &l[j])?)?;
                // delta_dag(x)_j l_j with delta_dag(x)_j = -conj(c_j) d_j(x)
                route1 = route1.add(&torus_mul(&djx.scale(-c[j].conj()), &l[j])?)?;
            }
            route1 = route1.add(&torus_mul(&k_star, &x)?)?;
            route1 = route1.add(&torus_mul(&x, k)?)?;

            // route 2: -1/2 sum_j (beta_j d_j + d_{n_j})^2 (x)
            let mut route2 = TorusElement::zero(lambda);
            for j in 0..2 {
                let dprime = |y: &TorusElement| -> Result<TorusElement> {
                    let a = torus_derivation(y, j + 1)?.scale(cr(betas[j]));
                    let b = torus_mul(y, &n_elems[j])?.sub(&torus_mul(&n_elems[j], y)?)?;
                    a.add(&b)
                };
                let once = dprime(&x)?;
                let twice = dprime(&once)?;
                route2 = route2.add(&twice.scale(cr(-0.5)))?;
            }

            worst = worst.max(route1.sub(&route2)?.max_coeff_norm());
        }
    }
    Ok(worst)
}

/// Builds both sides of the sum-of-squares Laplacian identity with the
/// corrected `k` and returns the max coefficient residual.
pub fn gauge_perturb_check(
    betas: &[f64; 2],
    n_elems: &[TorusElement; 2],
    degree_bound: i64,
    tol: f64,
) -> Result<f64> {
    for (j, nj) in n_elems.iter().enumerate() {
        let defect = nj.self_adjoint_defect();
        if defect > tol {
            return Err(Error::Precheck(format!(
                "n_{} must be self-adjoint (defect {defect:.3e})",
                j + 1
            )));
        }
    }
    let k = laplacian_k(betas, n_elems)?;
    gauge_perturb_residual(betas, n_elems, &k, degree_bound)
}
