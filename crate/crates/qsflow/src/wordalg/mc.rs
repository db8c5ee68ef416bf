//! Monte Carlo check that the torus flow has a classical origin: the
//! randomised circle action along a Wiener path reproduces the semigroup
//! decay on each monomial.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::opcore::C64;

/// Paths per independent seeded chunk; the merged estimate is independent of
/// scheduling order.
const CHUNK: u64 = 4096;

/// Result of the randomised-action estimate.
#[derive(Debug, Clone)]
pub struct McRandomizedAction {
    /// Monte Carlo average of `exp(i (m |c1| w1_t + n |c2| w2_t))`.
    pub estimate: C64,
    pub stderr: f64,
    /// Closed form `exp(-(m^2 |c1|^2 + n^2 |c2|^2) t / 2)`.
    pub reference: C64,
    pub paths: u64,
}

/// Samples the randomised group action phase over seeded Gaussian increments.
pub fn mc_randomized_action(
    m: i64,
    n: i64,
    c1: C64,
    c2: C64,
    t: f64,
    paths: u64,
    seed: u64,
) -> Result<McRandomizedAction> {
    if paths < 100 {
        return Err(Error::Range(format!("need at least 100 paths, got {paths}")));
    }
    if t < 0.0 {
        return Err(Error::Range(format!("time must be non-negative, got {t}")));
    }
    let a1 = m as f64 * c1.norm();
    let a2 = n as f64 * c2.norm();
    let sqrt_t = t.sqrt();

    let chunks: u64 = paths.div_ceil(CHUNK);
    let stats: Vec<(C64, f64, u64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk + 1);
            let count = CHUNK.min(paths - chunk * CHUNK);
            let mut sum = C64::new(0.0, 0.0);
            let mut sum_sq = 0.0f64;
            for _ in 0..count {
                let (g1, g2) = gauss_pair(&mut rng);
                let phase = a1 * sqrt_t * g1 + a2 * sqrt_t * g2;
                let v = C64::new(phase.cos(), phase.sin());
                sum += v;
                sum_sq += v.norm_sqr();
            }
            (sum, sum_sq, count)
        })
        .collect();

    let mut sum = C64::new(0.0, 0.0);
    let mut sum_sq = 0.0;
    for (s, s2, _) in &stats {
        sum += s;
        sum_sq += s2;
    }
    let nf = paths as f64;
    let estimate = sum / C64::new(nf, 0.0);
    // variance of the complex sample around its mean
    let var = (sum_sq / nf - estimate.norm_sqr()).max(0.0);
    let stderr = (var / nf).sqrt();
    let reference = C64::new((-0.5 * (a1 * a1 + a2 * a2) * t).exp(), 0.0);
    Ok(McRandomizedAction {
        estimate,
        stderr,
        reference,
        paths,
    })
}

/// Box-Muller pair of independent standard normals.
fn gauss_pair(rng: &mut impl Rng) -> (f64, f64) {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}
