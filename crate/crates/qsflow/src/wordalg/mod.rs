//! Universal C*-algebra presentations: parsing, balance analysis, the
//! word-counting derivations, the symbolic noncommutative torus and the
//! Monte Carlo randomised-action check.
//!
//! General presentations support parsing, balance classification and
//! derivation counting only; the torus is the one algebra with a normal
//! form and a full product calculus here.

pub mod mc;
pub mod presentation;
pub mod torus;
pub mod word;

pub use mc::{mc_randomized_action, McRandomizedAction};
pub use presentation::{
    balance_check, cuntz_source, parse_presentation, rotation_algebra_source, sphere_source,
    BalanceReport, GeneratorFlag, Presentation, SphereKind,
};
pub use torus::{
    gauge_perturb_check, gauge_perturb_residual, laplacian_k, torus_cocycle_element,
    torus_compressed_scalar, torus_derivation, torus_mul, Lambda, TorusElement, MUL_PHASE_SIGN,
};
pub use word::{apply_derivation, FreeElement, Letter, Word};
