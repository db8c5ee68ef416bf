//! Shared oracles for the integration suites: these stay independent of the
//! library code paths they are used to check.

use std::collections::HashMap;

use qsflow::cocycle::StepFunction;
use qsflow::opcore::{cr, ComplexMatrix, C64};
use qsflow::stdgen::{semigroup_generator, GeneratorMap};
use qsflow::wordalg::{Lambda, TorusElement};

/// Fixed-step RK4 integration of `M' = M L(t)` for the piecewise-constant
/// cocycle generator, with steps aligned to its own breakpoint merge.
pub fn rk4_cocycle_oracle(
    phi: &GeneratorMap,
    f: &StepFunction,
    g: &StepFunction,
    t: f64,
    dt_max: f64,
) -> ComplexMatrix {
    let d2 = phi.dims().d * phi.dims().d;
    let mut m = ComplexMatrix::identity(d2);
    // own breakpoint refinement, independent of the library helper
    let mut cuts: Vec<f64> = f
        .breakpoints()
        .into_iter()
        .chain(g.breakpoints())
        .filter(|&x| x > 1e-13 && x < t - 1e-13)
        .collect();
    cuts.push(0.0);
    cuts.push(t);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    for win in cuts.windows(2) {
        let (a, b) = (win[0], win[1]);
        if b - a < 1e-13 {
            continue;
        }
        let mid = 0.5 * (a + b);
        let l = semigroup_generator(phi, &f.value_at(mid), &g.value_at(mid)).expect("dims");
        let steps = ((b - a) / dt_max).ceil().max(1.0) as usize;
        let dt = (b - a) / steps as f64;
        for _ in 0..steps {
            let k1 = m.matmul(&l);
            let k2 = (&m + &k1.scale(cr(0.5 * dt))).matmul(&l);
            let k3 = (&m + &k2.scale(cr(0.5 * dt))).matmul(&l);
            let k4 = (&m + &k3.scale(cr(dt))).matmul(&l);
            m = &m
                + &(&(&k1 + &k2.scale(cr(2.0))) + &(&k3.scale(cr(2.0)) + &k4)).scale(cr(dt / 6.0));
        }
    }
    m
}

/// Concrete l2(Z^2) window representation of the torus: single-step actions
/// of U, V and their inverses applied repeatedly.
#[derive(Clone)]
pub struct WindowVec(pub HashMap<(i64, i64), C64>);

impl WindowVec {
    pub fn basis(a: i64, b: i64) -> Self {
        let mut m = HashMap::new();
        m.insert((a, b), cr(1.0));
        WindowVec(m)
    }

    fn apply_u(&self, inverse: bool) -> Self {
        let shift = if inverse { 1 } else { -1 };
        WindowVec(
            self.0
                .iter()
                .map(|(&(a, b), &z)| ((a + shift, b), z))
                .collect(),
        )
    }

    fn apply_v(&self, lambda: Lambda, inverse: bool) -> Self {
        WindowVec(
            self.0
                .iter()
                .map(|(&(a, b), &z)| {
                    if inverse {
                        ((a, b + 1), z * lambda.power(-a))
                    } else {
                        ((a, b - 1), z * lambda.power(a))
                    }
                })
                .collect(),
        )
    }

    pub fn apply_element(&self, x: &TorusElement) -> Self {
        let mut acc: HashMap<(i64, i64), C64> = HashMap::new();
        for ((m, n), cf) in x.terms() {
            let mut cur = self.clone();
            for _ in 0..n.abs() {
                cur = cur.apply_v(x.lambda, *n < 0);
            }
            for _ in 0..m.abs() {
                cur = cur.apply_u(*m < 0);
            }
            for (k, z) in cur.0 {
                *acc.entry(k).or_insert(C64::new(0.0, 0.0)) += cf * z;
            }
        }
        WindowVec(acc)
    }

    pub fn dist(&self, other: &Self) -> f64 {
        let keys: Vec<(i64, i64)> = self.0.keys().chain(other.0.keys()).copied().collect();
        let mut worst = 0.0f64;
        for k in keys {
            let a = self.0.get(&k).copied().unwrap_or(C64::new(0.0, 0.0));
            let b = other.0.get(&k).copied().unwrap_or(C64::new(0.0, 0.0));
            worst = worst.max((a - b).norm());
        }
        worst
    }

    /// `<delta_(a,b), x delta_(c,d)>` under the representation.
    pub fn matrix_element(x: &TorusElement, bra: (i64, i64), ket: (i64, i64)) -> C64 {
        let moved = WindowVec::basis(ket.0, ket.1).apply_element(x);
        moved.0.get(&bra).copied().unwrap_or(C64::new(0.0, 0.0))
    }
}
