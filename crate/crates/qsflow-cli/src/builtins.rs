//! Built-in models and presentations addressable by name.

use anyhow::{bail, Result};

use qsflow::carmodel::ExclusionSpec;
use qsflow::opcore::{c, cr, ComplexMatrix};
use qsflow::wordalg::{cuntz_source, rotation_algebra_source, sphere_source, SphereKind};

/// One row of the `qsflow list` output.
pub struct BuiltinEntry {
    pub name: &'static str,
    pub kind: &'static str,
    pub description: &'static str,
}

/// Stable, sorted listing of everything addressable by name.
pub fn catalogue() -> Vec<BuiltinEntry> {
    let mut rows = vec![
        BuiltinEntry {
            name: "cuntz-N",
            kind: "presentation",
            description: "Cuntz algebra O_N (parametric: cuntz-2, cuntz-3, ...)",
        },
        BuiltinEntry {
            name: "exclusion-m2",
            kind: "model",
            description: "two-site quantum exclusion data (eta, alpha, beta)",
        },
        BuiltinEntry {
            name: "free-sphere",
            kind: "presentation",
            description: "complex free sphere on 3 generators",
        },
        BuiltinEntry {
            name: "half-liberated-sphere",
            kind: "presentation",
            description: "half-liberated complex sphere on 3 generators",
        },
        BuiltinEntry {
            name: "inner-d2",
            kind: "generator",
            description: "inner flow d=2, n=1 with h=diag(1,-1), t=[[0,1],[0,0]]",
        },
        BuiltinEntry {
            name: "real-sphere",
            kind: "presentation",
            description: "real sphere on 3 self-adjoint generators (unbalanced)",
        },
        BuiltinEntry {
            name: "rotation-algebra",
            kind: "presentation",
            description: "universal rotation algebra (U, V, Z; 9 relations)",
        },
        BuiltinEntry {
            name: "trivial-d2",
            kind: "generator",
            description: "trivial flow d=2, n=1 (h = 0, t = 0)",
        },
        BuiltinEntry {
            name: "twisted-half-liberated-sphere",
            kind: "presentation",
            description: "twisted half-liberated complex sphere on 3 generators",
        },
        BuiltinEntry {
            name: "twisted-sphere",
            kind: "presentation",
            description: "twisted complex sphere on 3 generators",
        },
    ];
    rows.sort_by_key(|r| r.name);
    rows
}

/// Inner-flow data for named generator builtins.
pub fn inner_flow(name: &str) -> Result<(ComplexMatrix, ComplexMatrix)> {
    match name {
        "inner-d2" => {
            let mut h = ComplexMatrix::zeros(2, 2);
            h[(0, 0)] = cr(1.0);
            h[(1, 1)] = cr(-1.0);
            let mut t = ComplexMatrix::zeros(2, 2);
            t[(0, 1)] = cr(1.0);
            Ok((h, t))
        }
        "trivial-d2" => Ok((ComplexMatrix::zeros(2, 2), ComplexMatrix::zeros(2, 2))),
        other => bail!("unknown generator builtin '{other}'"),
    }
}

/// Presentation source for named builtins, including parametric cuntz-N.
pub fn presentation_source(name: &str) -> Result<String> {
    if let Some(n) = name.strip_prefix("cuntz-") {
        let n: usize = n
            .parse()
            .map_err(|_| anyhow::anyhow!("bad Cuntz parameter in '{name}'"))?;
        if n == 0 {
            bail!("cuntz-N needs N >= 1");
        }
        return Ok(cuntz_source(n));
    }
    let kind = match name {
        "rotation-algebra" => return Ok(rotation_algebra_source().to_string()),
        "free-sphere" => SphereKind::Free,
        "twisted-sphere" => SphereKind::Twisted,
        "half-liberated-sphere" => SphereKind::HalfLiberated,
        "twisted-half-liberated-sphere" => SphereKind::TwistedHalfLiberated,
        "real-sphere" => SphereKind::Real,
        other => bail!("unknown presentation builtin '{other}'"),
    };
    Ok(sphere_source(kind, 3))
}

/// The two-site exclusion demo data.
pub fn exclusion_m2() -> ExclusionSpec {
    let mut alpha = ComplexMatrix::zeros(2, 2);
    alpha[(0, 1)] = cr(1.0);
    alpha[(1, 0)] = cr(0.25);
    let mut beta = ComplexMatrix::zeros(2, 2);
    beta[(1, 0)] = c(0.0, 0.5);
    beta[(0, 1)] = cr(-0.2);
    ExclusionSpec::new(2, vec![1.0, -1.0], alpha, beta).expect("static data")
}
