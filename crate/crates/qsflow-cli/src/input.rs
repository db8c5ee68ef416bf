//! JSON input forms: complex numbers as `[re, im]`, matrices as row-major
//! nested arrays, step functions as duration/value segments.

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use qsflow::cocycle::StepFunction;
use qsflow::opcore::{ComplexMatrix, C64};

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct Cx(pub f64, pub f64);

impl From<Cx> for C64 {
    fn from(c: Cx) -> C64 {
        C64::new(c.0, c.1)
    }
}

pub type MatrixIn = Vec<Vec<Cx>>;
pub type VectorIn = Vec<Cx>;

pub fn to_matrix(m: &MatrixIn, what: &str) -> Result<ComplexMatrix> {
    let rows = m.len();
    if rows == 0 {
        bail!("{what}: matrix must have at least one row");
    }
    let cols = m[0].len();
    for (i, row) in m.iter().enumerate() {
        if row.len() != cols {
            bail!("{what}: row {i} has {} entries, expected {cols}", row.len());
        }
    }
    let entries: Vec<C64> = m.iter().flatten().map(|&c| c.into()).collect();
    ComplexMatrix::new(rows, cols, entries).with_context(|| what.to_string())
}

pub fn to_vector(v: &VectorIn) -> Vec<C64> {
    v.iter().map(|&c| c.into()).collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSegmentIn {
    pub duration: f64,
    pub value: VectorIn,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepIn {
    pub segments: Vec<StepSegmentIn>,
}

impl StepIn {
    pub fn to_step(&self, n: usize, what: &str) -> Result<StepFunction> {
        let segs: Vec<(f64, Vec<C64>)> = self
            .segments
            .iter()
            .map(|s| (s.duration, to_vector(&s.value)))
            .collect();
        StepFunction::new(segs, n).with_context(|| what.to_string())
    }
}

/// A generator given either by a built-in name or by explicit inner-flow
/// data `(h, t)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorIn {
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub h: Option<MatrixIn>,
    #[serde(default)]
    pub t: Option<MatrixIn>,
}

impl GeneratorIn {
    pub fn inner_data(&self) -> Result<(ComplexMatrix, ComplexMatrix)> {
        if let Some(name) = &self.builtin {
            if self.h.is_some() || self.t.is_some() {
                bail!("give either a builtin name or explicit (h, t), not both");
            }
            return crate::builtins::inner_flow(name);
        }
        match (&self.h, &self.t) {
            (Some(h), Some(t)) => Ok((to_matrix(h, "h")?, to_matrix(t, "t")?)),
            _ => bail!("generator needs a builtin name or both h and t"),
        }
    }
}

/// A multiplier coefficient: Weyl data, explicit blocks or zero.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientIn {
    Weyl {
        h: f64,
        c: VectorIn,
        u: MatrixIn,
    },
    Blocks {
        k: MatrixIn,
        m: MatrixIn,
        l: MatrixIn,
        w: MatrixIn,
    },
    Zero {},
}
