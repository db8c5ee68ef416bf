//! Exact evaluation of cocycle matrix elements by semigroup factorisation,
//! and checks of the cocycle and semigroup laws.
//!
//! Along a pair of step functions the cocycle element factorises as
//! `k_t[f, g] = P^{z0,w0}_{t1-t0} o ... o P^{zn,wn}_{t-tn}` with each factor
//! `P^{z,w}_s = exp(s (psi^{zhat}_{what} - chi(z,w) id))`. Composition order
//! is fixed: the earliest interval's factor acts last, so superoperator
//! matrices multiply left to right in time order.

use crate::error::{Error, Result};
use crate::opcore::{cr, expm, ComplexMatrix, C64};
use crate::stdgen::{chi, semigroup_generator, GeneratorMap};

/// Breakpoints closer than this (relative to the total length) are merged
/// when refining two step functions to a common grid.
pub const MERGE_TOL: f64 = 1e-12;

/// A right-continuous step function with values in the multiplicity space;
/// zero after the last breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    segments: Vec<(f64, Vec<C64>)>,
    n: usize,
}

impl StepFunction {
    pub fn new(segments: Vec<(f64, Vec<C64>)>, n: usize) -> Result<Self> {
        for (dur, val) in &segments {
            if !(*dur > 0.0) {
                return Err(Error::Range(format!(
                    "segment durations must be positive, got {dur}"
                )));
            }
            if val.len() != n {
                return Err(Error::Dimension(format!(
                    "segment value has length {}, expected {n}",
                    val.len()
                )));
            }
        }
        Ok(Self { segments, n })
    }

    /// Constant value on `[0, t)`.
    pub fn constant(value: Vec<C64>, t: f64) -> Result<Self> {
        let n = value.len();
        Self::new(vec![(t, value)], n)
    }

    /// The zero function of multiplicity `n` on `[0, t)`.
    pub fn zero(n: usize, t: f64) -> Self {
        Self::new(vec![(t, vec![cr(0.0); n])], n).expect("positive duration")
    }

    pub fn multiplicity(&self) -> usize {
        self.n
    }

    pub fn segments(&self) -> &[(f64, Vec<C64>)] {
        &self.segments
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|(d, _)| d).sum()
    }

    /// Value at time `s` (zero past the last breakpoint).
    pub fn value_at(&self, s: f64) -> Vec<C64> {
        let mut acc = 0.0;
        for (dur, val) in &self.segments {
            if s < acc + dur {
                return val.clone();
            }
            acc += dur;
        }
        vec![cr(0.0); self.n]
    }

    /// Sorted breakpoints, including 0 and the total time.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        let mut acc = 0.0;
        for (dur, _) in &self.segments {
            acc += dur;
            out.push(acc);
        }
        out
    }
}

/// Left shift `f(. + s)`, truncating the front; the tail stays zero.
pub fn shift_step(f: &StepFunction, s: f64) -> Result<StepFunction> {
    if s < 0.0 {
        return Err(Error::Range(format!("shift must be non-negative, got {s}")));
    }
    let total = f.total_time();
    let mut remaining = s;
    let mut out = Vec::new();
    for (dur, val) in &f.segments {
        if remaining >= *dur {
            remaining -= dur;
            continue;
        }
        let keep = dur - remaining;
        if keep > MERGE_TOL * total.max(1.0) {
            out.push((keep, val.clone()));
        }
        remaining = 0.0;
    }
    StepFunction::new(out, f.n)
}

/// Common refinement of the breakpoint grids of `f` and `g` up to time `t`.
/// Returns `(duration, f value, g value)` per refined segment.
pub fn common_refinement(
    f: &StepFunction,
    g: &StepFunction,
    t: f64,
) -> Vec<(f64, Vec<C64>, Vec<C64>)> {
    refine(f, g, t)
}

fn refine(f: &StepFunction, g: &StepFunction, t: f64) -> Vec<(f64, Vec<C64>, Vec<C64>)> {
    let tol = MERGE_TOL * t.max(1.0);
    let mut cuts: Vec<f64> = f
        .breakpoints()
        .into_iter()
        .chain(g.breakpoints())
        .chain([0.0])
        .filter(|&x| x < t - tol)
        .collect();
    cuts.push(t);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= tol);
    let mut out = Vec::new();
    for win in cuts.windows(2) {
        let (a, b) = (win[0], win[1]);
        if b - a <= tol {
            continue;
        }
        let mid = 0.5 * (a + b);
        out.push((b - a, f.value_at(mid), g.value_at(mid)));
    }
    out
}

/// A cocycle matrix element `k_t[f, g]` as a superoperator on B(h), together
/// with the data it was evaluated at.
#[derive(Debug, Clone)]
pub struct CocycleElement {
    pub action: ComplexMatrix,
    pub f: StepFunction,
    pub g: StepFunction,
    pub t: f64,
}

/// Evaluates `k_t[f, g]` by multiplying the semigroup factors of the common
/// refinement in time order.
pub fn eval_cocycle_element(
    phi: &GeneratorMap,
    f: &StepFunction,
    g: &StepFunction,
    t: f64,
) -> Result<CocycleElement> {
    let dims = phi.dims();
    if f.multiplicity() != dims.n || g.multiplicity() != dims.n {
        return Err(Error::Dimension(format!(
            "step functions must take values in C^{}, got {} and {}",
            dims.n,
            f.multiplicity(),
            g.multiplicity()
        )));
    }
    let slack = MERGE_TOL * t.abs().max(1.0);
    if t < -slack || t > f.total_time() + slack || t > g.total_time() + slack {
        return Err(Error::Range(format!(
            "evaluation time {t} outside [0, {}]",
            f.total_time().min(g.total_time())
        )));
    }
    let d2 = dims.d * dims.d;
    let mut action = ComplexMatrix::identity(d2);
    if t > slack {
        for (dur, zf, zg) in refine(f, g, t) {
            let gen = semigroup_generator(phi, &zf, &zg)?;
            let factor = expm(&gen.scale(cr(dur)), 1e-13)?;
            // earliest factor leftmost: matrix product order = time order
            action = action.matmul(&factor);
        }
    }
    Ok(CocycleElement {
        action,
        f: f.clone(),
        g: g.clone(),
        t,
    })
}

/// Defect of the cocycle identity
/// `k_{s+t}[f, g] = k_s[f, g] o k_t[f(.+s), g(.+s)]`.
pub fn check_cocycle_identity(
    phi: &GeneratorMap,
    f: &StepFunction,
    g: &StepFunction,
    s: f64,
    t: f64,
) -> Result<f64> {
    if s < 0.0 || t < 0.0 {
        return Err(Error::Range("s and t must be non-negative".into()));
    }
    let lhs = eval_cocycle_element(phi, f, g, s + t)?;
    let first = eval_cocycle_element(phi, f, g, s)?;
    let fs = shift_step(f, s)?;
    let gs = shift_step(g, s)?;
    let second = eval_cocycle_element(phi, &fs, &gs, t)?;
    let composed = first.action.matmul(&second.action);
    Ok((&lhs.action - &composed).max_abs())
}

/// The associated semigroup `P^{z,w}_t = exp(t (psi^{zhat}_{what} - chi id))`.
pub fn associated_semigroup(
    phi: &GeneratorMap,
    z: &[C64],
    w: &[C64],
    t: f64,
) -> Result<ComplexMatrix> {
    if t < 0.0 {
        return Err(Error::Range(format!("time must be non-negative, got {t}")));
    }
    let gen = semigroup_generator(phi, z, w)?;
    expm(&gen.scale(cr(t)), 1e-13)
}

/// `<nu(f|[0,t)), nu(g|[0,t))>` for step functions, via the chi integral.
pub fn normalized_exp_inner(f: &StepFunction, g: &StepFunction, t: f64) -> Result<C64> {
    let mut exponent = C64::new(0.0, 0.0);
    for (dur, zf, zg) in refine(f, g, t) {
        exponent -= chi(&zf, &zg)? * cr(dur);
    }
    Ok(exponent.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opcore::random::{random_hermitian, random_matrix, random_vector};
    use crate::opcore::{apply_superop, c};
    use crate::stdgen::{build_inner_generator, matrix_units, DEFAULT_TOL};
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_step(n: usize, t: f64, pieces: usize, r: &mut impl Rng) -> StepFunction {
        let mut cuts: Vec<f64> = (0..pieces - 1).map(|_| r.gen_range(0.05..0.95) * t).collect();
        cuts.push(0.0);
        cuts.push(t);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut segs = Vec::new();
        for w in cuts.windows(2) {
            if w[1] - w[0] > 1e-3 {
                segs.push((w[1] - w[0], random_vector(n, 1.0, r)));
            }
        }
        StepFunction::new(segs, n).unwrap()
    }

    fn inner_gen(d: usize, n: usize, r: &mut impl Rng) -> GeneratorMap {
        let h = random_hermitian(d, 1.0, r);
        let t = random_matrix(d * n, d, 1.0, r);
        build_inner_generator(&h, &t, DEFAULT_TOL).unwrap()
    }

    #[test]
    fn shift_step_cases() {
        let z = vec![c(1.0, 0.0)];
        let w = vec![c(0.0, 1.0)];
        let f = StepFunction::new(vec![(0.5, z.clone()), (0.5, w.clone())], 1).unwrap();

        assert_eq!(shift_step(&f, 0.0).unwrap(), f);

        let single = StepFunction::constant(z.clone(), 1.0).unwrap();
        let shifted = shift_step(&single, 0.25).unwrap();
        assert_eq!(shifted.segments().len(), 1);
        assert!((shifted.total_time() - 0.75).abs() < 1e-15);

        let shifted = shift_step(&f, 0.5).unwrap();
        assert_eq!(shifted.segments(), &[(0.5, w)]);

        assert!(shift_step(&f, -0.1).is_err());
    }

    #[test]
    fn eval_at_zero_is_identity() {
        let mut r = rng(3);
        let phi = inner_gen(2, 1, &mut r);
        let f = StepFunction::zero(1, 1.0);
        let e = eval_cocycle_element(&phi, &f, &f, 0.0).unwrap();
        assert!((&e.action - &ComplexMatrix::identity(4)).max_abs() == 0.0);
    }

    #[test]
    fn vacuum_evaluation_is_tau_semigroup() {
        let mut r = rng(5);
        let phi = inner_gen(2, 1, &mut r);
        let f = StepFunction::zero(1, 1.0);
        let t = 0.8;
        let e = eval_cocycle_element(&phi, &f, &f, t).unwrap();
        let zero = vec![cr(0.0)];
        let tau = crate::stdgen::compress_generator(&phi, &zero, &zero).unwrap();
        let want = expm(&tau.scale(cr(t)), 1e-13).unwrap();
        assert!((&e.action - &want).max_abs() < 1e-12);
    }

    #[test]
    fn refinement_invariance() {
        let mut r = rng(7);
        let phi = inner_gen(2, 2, &mut r);
        let z = random_vector(2, 1.0, &mut r);
        let w = random_vector(2, 1.0, &mut r);
        let coarse_f = StepFunction::constant(z.clone(), 1.0).unwrap();
        let coarse_g = StepFunction::constant(w.clone(), 1.0).unwrap();
        // split by hand at interior points
        let fine_f = StepFunction::new(vec![(0.37, z.clone()), (0.63, z)], 2).unwrap();
        let fine_g = StepFunction::new(vec![(0.58, w.clone()), (0.42, w)], 2).unwrap();
        let a = eval_cocycle_element(&phi, &coarse_f, &coarse_g, 1.0).unwrap();
        let b = eval_cocycle_element(&phi, &fine_f, &fine_g, 1.0).unwrap();
        assert!((&a.action - &b.action).max_abs() < 1e-12);
    }

    #[test]
    fn matches_rk4_integrator_oracle() {
        // M' = M L(t), M(0) = I, integrated with fixed fine RK4 steps
        let mut r = rng(11);
        let phi = inner_gen(2, 1, &mut r);
        let f = random_step(1, 1.0, 3, &mut r);
        let g = random_step(1, 1.0, 3, &mut r);
        let t = 1.0;
        let e = eval_cocycle_element(&phi, &f, &g, t).unwrap();

        // step boundaries must align with the breakpoints, otherwise the
        // discontinuous integrand costs RK4 its order
        let mut m = ComplexMatrix::identity(4);
        for (dur, zf, zg) in super::refine(&f, &g, t) {
            let l = crate::stdgen::semigroup_generator(&phi, &zf, &zg).unwrap();
            let steps = (dur / 2e-3).ceil().max(1.0) as usize;
            let dt = dur / steps as f64;
            for _ in 0..steps {
                let k1 = m.matmul(&l);
                let k2 = (&m + &k1.scale(cr(0.5 * dt))).matmul(&l);
                let k3 = (&m + &k2.scale(cr(0.5 * dt))).matmul(&l);
                let k4 = (&m + &k3.scale(cr(dt))).matmul(&l);
                m = &m
                    + &(&(&k1 + &k2.scale(cr(2.0))) + &(&k3.scale(cr(2.0)) + &k4))
                        .scale(cr(dt / 6.0));
            }
        }
        assert!(
            (&e.action - &m).max_abs() < 1e-8,
            "defect {}",
            (&e.action - &m).max_abs()
        );
    }

    #[test]
    fn cocycle_identity_defects() {
        let mut r = rng(13);
        let phi = inner_gen(2, 1, &mut r);
        let f = random_step(1, 2.0, 4, &mut r);
        let g = random_step(1, 2.0, 4, &mut r);

        // s = 0 is exact
        let d = check_cocycle_identity(&phi, &f, &g, 0.0, 1.3).unwrap();
        assert!(d < 1e-12);

        // constant case reduces to the one-parameter semigroup law
        let cf = StepFunction::constant(random_vector(1, 1.0, &mut r), 2.0).unwrap();
        let cg = StepFunction::constant(random_vector(1, 1.0, &mut r), 2.0).unwrap();
        let d = check_cocycle_identity(&phi, &cf, &cg, 0.7, 0.9).unwrap();
        assert!(d < 1e-12);

        // breakpoints straddling s
        for _ in 0..5 {
            let s = r.gen_range(0.3..1.0);
            let t = r.gen_range(0.3..0.9);
            let d = check_cocycle_identity(&phi, &f, &g, s, t).unwrap();
            assert!(d < 1e-9, "defect {d}");
        }
    }

    #[test]
    fn associated_semigroup_laws() {
        let mut r = rng(17);
        let phi = inner_gen(2, 2, &mut r);
        let z = random_vector(2, 1.0, &mut r);
        let w = random_vector(2, 1.0, &mut r);

        let p0 = associated_semigroup(&phi, &z, &w, 0.0).unwrap();
        assert!((&p0 - &ComplexMatrix::identity(4)).max_abs() == 0.0);

        let s = r.gen_range(0.1..1.0);
        let t = r.gen_range(0.1..1.0);
        let ps = associated_semigroup(&phi, &z, &w, s).unwrap();
        let pt = associated_semigroup(&phi, &z, &w, t).unwrap();
        let pst = associated_semigroup(&phi, &z, &w, s + t).unwrap();
        assert!((&ps.matmul(&pt) - &pst).max_abs() < 1e-12);

        // unital at z = w
        let pzz = associated_semigroup(&phi, &z, &z, 0.9).unwrap();
        let one = apply_superop(&pzz, &ComplexMatrix::identity(2), 2, 2);
        assert!((&one - &ComplexMatrix::identity(2)).max_abs() < 1e-10);
    }

    #[test]
    fn hermiticity_transport() {
        let mut r = rng(19);
        let phi = inner_gen(2, 1, &mut r);
        let f = random_step(1, 1.0, 3, &mut r);
        let g = random_step(1, 1.0, 3, &mut r);
        let efg = eval_cocycle_element(&phi, &f, &g, 1.0).unwrap();
        let egf = eval_cocycle_element(&phi, &g, &f, 1.0).unwrap();
        for x in matrix_units(2) {
            let lhs = apply_superop(&efg.action, &x.adjoint(), 2, 2);
            let rhs = apply_superop(&egf.action, &x, 2, 2).adjoint();
            assert!((&lhs - &rhs).max_abs() < 1e-10);
        }
    }

    #[test]
    fn eval_rejects_out_of_range_time() {
        let mut r = rng(23);
        let phi = inner_gen(2, 1, &mut r);
        let f = StepFunction::zero(1, 1.0);
        assert!(eval_cocycle_element(&phi, &f, &f, 1.5).is_err());
    }

    #[test]
    fn normalized_exp_inner_matches_closed_form() {
        let mut r = rng(29);
        let z = random_vector(1, 1.0, &mut r);
        let w = random_vector(1, 1.0, &mut r);
        let f = StepFunction::constant(z.clone(), 1.0).unwrap();
        let g = StepFunction::constant(w.clone(), 1.0).unwrap();
        let got = normalized_exp_inner(&f, &g, 1.0).unwrap();
        let want = (-chi(&z, &w).unwrap()).exp();
        assert!((got - want).norm() < 1e-14);
    }
}
