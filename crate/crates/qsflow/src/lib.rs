//! Finite-dimensional quantum stochastic flows and their Feynman-Kac
//! perturbations.
//!
//! The crate provides, over a finite initial space `h` and multiplicity
//! space `k`:
//!
//! * stochastic generators in standard block form and their validation
//!   ([`stdgen`]);
//! * multiplier coefficients, the `q(F)` contractivity calculus and the
//!   perturbed-generator composition ([`perturb`]);
//! * exact cocycle evaluation by semigroup factorisation along step
//!   functions ([`cocycle`]);
//! * a discrete repeated-interaction Fock simulator used as an independent
//!   numerical check of the perturbation formula ([`toyfock`]);
//! * the quantum exclusion model on finitely many fermionic sites
//!   ([`carmodel`]);
//! * a parser and word calculus for universal-algebra presentations,
//!   including the noncommutative torus ([`wordalg`]).

pub mod carmodel;
pub mod cocycle;
pub mod error;
pub mod opcore;
pub mod perturb;
pub mod stdgen;
pub mod toyfock;
pub mod wordalg;

pub use error::{Error, Result};
