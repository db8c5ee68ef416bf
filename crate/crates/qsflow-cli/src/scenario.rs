//! Scenario files: JSON with a top-level `kind` discriminator, kind-specific
//! parameters, an optional seed and an output directory. Runs are
//! deterministic given the seed; outputs are CSV tables plus a JSON run
//! manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use qsflow::carmodel::{exclusion_multiplier, verify_amplitude_addition, ExclusionSpec};
use qsflow::cocycle::eval_cocycle_element;
use qsflow::opcore::random::{random_hermitian, random_matrix, random_unitary, random_vector};
use qsflow::opcore::{ComplexMatrix, SpaceDims, C64};
use qsflow::perturb::{
    classify_contractive, perturbed_generator, perturbed_generator_blocks, q_of, weyl_coefficient,
    weyl_shift_check, BlockCoefficient,
};
use qsflow::stdgen::{build_inner_generator, validate_standard_form, StandardFormStatus};
use qsflow::toyfock::{cross_validate, InnerFlowSpec};
use qsflow::wordalg::{
    balance_check, gauge_perturb_check, mc_randomized_action, parse_presentation,
    torus_cocycle_element, Lambda, TorusElement,
};

use crate::builtins;
use crate::input::{to_matrix, to_vector, Cx, CoefficientIn, GeneratorIn, MatrixIn, StepIn, VectorIn};

/// Default tolerance mirrored from the library.
const TOL: f64 = 1e-10;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub kind: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub output_path: PathBuf,
    pub parameters: serde_json::Value,
}

pub fn load(path: &Path) -> Result<ScenarioFile> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading scenario file {}", path.display()))?;
    let scenario: ScenarioFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(scenario)
}

/// Schema check only: parameters must deserialize for the declared kind.
pub fn validate(scenario: &ScenarioFile) -> Result<()> {
    parse_params(scenario).map(|_| ())
}

enum Params {
    ValidateGenerator(ValidateGeneratorParams),
    ClassifyQf(ClassifyQfParams),
    Perturb(PerturbParams),
    WeylDemo(WeylDemoParams),
    CocycleEval(CocycleEvalParams),
    ToyfockConvergence(ToyfockParams),
    ExclusionDemo(ExclusionDemoParams),
    TorusDemo(TorusDemoParams),
    PresentationAnalyze(PresentationParams),
    McRandomizedAction(McParams),
}

fn parse_params(scenario: &ScenarioFile) -> Result<Params> {
    let p = scenario.parameters.clone();
    let parsed = match scenario.kind.as_str() {
        "validate-generator" => Params::ValidateGenerator(serde_json::from_value(p)?),
        "classify-qF" => Params::ClassifyQf(serde_json::from_value(p)?),
        "perturb" => Params::Perturb(serde_json::from_value(p)?),
        "weyl-demo" => Params::WeylDemo(serde_json::from_value(p)?),
        "cocycle-eval" => Params::CocycleEval(serde_json::from_value(p)?),
        "toyfock-convergence" => Params::ToyfockConvergence(serde_json::from_value(p)?),
        "exclusion-demo" => Params::ExclusionDemo(serde_json::from_value(p)?),
        "torus-demo" => Params::TorusDemo(serde_json::from_value(p)?),
        "presentation-analyze" => Params::PresentationAnalyze(serde_json::from_value(p)?),
        "mc-randomized-action" => Params::McRandomizedAction(serde_json::from_value(p)?),
        other => bail!(
            "unknown scenario kind '{other}'; expected one of validate-generator, classify-qF, \
             perturb, weyl-demo, cocycle-eval, toyfock-convergence, exclusion-demo, torus-demo, \
             presentation-analyze, mc-randomized-action"
        ),
    };
    Ok(parsed)
}

/// Runs a scenario, writing CSV outputs and a manifest into the output
/// directory (or `output_override` when given). Returns the files written.
pub fn run(scenario: &ScenarioFile, output_override: Option<&Path>) -> Result<Vec<PathBuf>> {
    let params = parse_params(scenario)?;
    let out_dir = output_override.unwrap_or(&scenario.output_path);
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let seed = scenario.seed.unwrap_or(0);
    let start = Instant::now();

    let outputs: Vec<(String, String)> = match params {
        Params::ValidateGenerator(p) => run_validate_generator(&p)?,
        Params::ClassifyQf(p) => run_classify_qf(&p)?,
        Params::Perturb(p) => run_perturb(&p)?,
        Params::WeylDemo(p) => run_weyl_demo(&p, seed)?,
        Params::CocycleEval(p) => run_cocycle_eval(&p)?,
        Params::ToyfockConvergence(p) => run_toyfock(&p, seed)?,
        Params::ExclusionDemo(p) => run_exclusion(&p, seed)?,
        Params::TorusDemo(p) => run_torus(&p)?,
        Params::PresentationAnalyze(p) => run_presentation(&p)?,
        Params::McRandomizedAction(p) => run_mc(&p, seed)?,
    };

    let mut written = Vec::new();
    for (name, content) in &outputs {
        let path = out_dir.join(name);
        write_atomic(&path, content)?;
        written.push(path);
    }

    let manifest = serde_json::json!({
        "tool": "qsflow",
        "version": env!("CARGO_PKG_VERSION"),
        "kind": scenario.kind,
        "seed": scenario.seed,
        "parameters": scenario.parameters,
        "outputs": outputs.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    let manifest_path = out_dir.join("manifest.json");
    write_atomic(&manifest_path, &serde_json::to_string_pretty(&manifest)?)?;
    written.push(manifest_path);
    Ok(written)
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn coefficient_from(input: &CoefficientIn, dims: SpaceDims) -> Result<BlockCoefficient> {
    match input {
        CoefficientIn::Weyl { h, c, u } => {
            let c = to_vector(c);
            let u = to_matrix(u, "coefficient.u")?;
            Ok(weyl_coefficient(*h, &c, &u, dims.d, TOL)?)
        }
        CoefficientIn::Blocks { k, m, l, w } => Ok(BlockCoefficient::new(
            dims,
            to_matrix(k, "coefficient.k")?,
            to_matrix(m, "coefficient.m")?,
            to_matrix(l, "coefficient.l")?,
            to_matrix(w, "coefficient.w")?,
        )?),
        CoefficientIn::Zero {} => Ok(BlockCoefficient::zero(dims)),
    }
}

// ---------------------------------------------------------------- scenarios

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValidateGeneratorParams {
    generator: GeneratorIn,
    #[serde(default)]
    tolerance: Option<f64>,
}

fn run_validate_generator(p: &ValidateGeneratorParams) -> Result<Vec<(String, String)>> {
    let (h, t) = p.generator.inner_data()?;
    let tol = p.tolerance.unwrap_or(TOL);
    let phi = build_inner_generator(&h, &t, tol)?;
    let report = validate_standard_form(&phi, tol)?;
    let mut csv = String::from("relation,residual\n");
    for (name, value) in [
        ("cohomology", report.cohomology),
        ("leibniz", report.leibniz),
        ("dagger", report.dagger),
        ("pi_homomorphism", report.pi_homomorphism),
        ("pi_unitality", report.pi_unitality),
        ("star_linearity", report.star_linearity),
    ] {
        csv.push_str(&format!("{name},{}\n", fmt(value)));
    }
    csv.push_str(&format!("pass,{}\n", report.pass));
    Ok(vec![("validation.csv".into(), csv)])
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifyQfParams {
    k: MatrixIn,
    m: MatrixIn,
    l: MatrixIn,
    w: MatrixIn,
    #[serde(default)]
    tolerance: Option<f64>,
}

fn run_classify_qf(p: &ClassifyQfParams) -> Result<Vec<(String, String)>> {
    let k = to_matrix(&p.k, "k")?;
    let l = to_matrix(&p.l, "l")?;
    let d = k.rows();
    if l.rows() % d != 0 {
        bail!("l must have d n rows for d = {d}");
    }
    let dims = SpaceDims::new(d, l.rows() / d).map_err(|e| anyhow!(e))?;
    let f = BlockCoefficient::new(
        dims,
        k,
        to_matrix(&p.m, "m")?,
        l,
        to_matrix(&p.w, "w")?,
    )?;
    let rep = classify_contractive(&f, p.tolerance.unwrap_or(TOL))?;
    let mut summary = String::from(
        "is_contractive,is_isometric_coefficient,min_eigenvalue_neg_q,m_identity_residual,v_unique\n",
    );
    summary.push_str(&format!(
        "{},{},{},{},{}\n",
        rep.is_contractive,
        rep.is_isometric_coefficient,
        fmt(rep.min_eigenvalue_neg_q),
        fmt(rep.m_identity_residual),
        rep.v_unique
    ));
    let mut qcsv = String::from("row,col,re,im\n");
    for i in 0..rep.q_matrix.rows() {
        for j in 0..rep.q_matrix.cols() {
            let z = rep.q_matrix[(i, j)];
            qcsv.push_str(&format!("{i},{j},{},{}\n", fmt(z.re), fmt(z.im)));
        }
    }
    Ok(vec![("classification.csv".into(), summary), ("q_matrix.csv".into(), qcsv)])
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerturbParams {
    generator: GeneratorIn,
    f: CoefficientIn,
    #[serde(default)]
    g: Option<CoefficientIn>,
    #[serde(default)]
    tolerance: Option<f64>,
}

fn run_perturb(p: &PerturbParams) -> Result<Vec<(String, String)>> {
    let (h, t) = p.generator.inner_data()?;
    let tol = p.tolerance.unwrap_or(TOL);
    let phi = build_inner_generator(&h, &t, tol)?;
    let dims = phi.dims();
    let f = coefficient_from(&p.f, dims)?;
    let g = match &p.g {
        Some(g) => coefficient_from(g, dims)?,
        None => f.clone(),
    };
    let psi = perturbed_generator(&phi, &f, &g)?;
    let psi_blocks = perturbed_generator_blocks(&phi, &f, &g)?;
    let formula_gap = (psi.action() - psi_blocks.action()).max_abs();
    let report = validate_standard_form(
        &psi.clone().with_status(StandardFormStatus::Unchecked),
        1e-9,
    )?;

    let mut summary = String::from("quantity,value\n");
    summary.push_str(&format!("formula_gap,{}\n", fmt(formula_gap)));
    summary.push_str(&format!("q_f_norm,{}\n", fmt(q_of(&f).max_abs())));
    summary.push_str(&format!("q_f_star_norm,{}\n", fmt(q_of(&f.star()).max_abs())));
    summary.push_str(&format!("psi_validation_max_residual,{}\n", fmt(report.max_residual())));
    summary.push_str(&format!("psi_standard_form_pass,{}\n", report.pass));
    summary.push_str(&format!(
        "psi_unitality,{}\n",
        fmt(psi.apply(&ComplexMatrix::identity(dims.d)).max_abs())
    ));

    let mut action = String::from("row,col,re,im\n");
    let a = psi.action();
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let z = a[(i, j)];
            if z.norm() > 0.0 {
                action.push_str(&format!("{i},{j},{},{}\n", fmt(z.re), fmt(z.im)));
            }
        }
    }
    Ok(vec![("summary.csv".into(), summary), ("psi_action.csv".into(), action)])
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeylDemoParams {
    d: usize,
    n: usize,
    instances: usize,
    #[serde(default)]
    tolerance: Option<f64>,
}

fn run_weyl_demo(p: &WeylDemoParams, seed: u64) -> Result<Vec<(String, String)>> {
    let tol = p.tolerance.unwrap_or(TOL);
    let mut csv = String::from("instance,d,n,shift_residual\n");
    for i in 0..p.instances {
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15));
        let h_op = random_hermitian(p.d, 1.0, &mut r);
        let t = random_matrix(p.d * p.n, p.d, 1.0, &mut r);
        let phi = build_inner_generator(&h_op, &t, tol)?;
        let u = random_unitary(p.n, &mut r);
        let c = random_vector(p.n, 1.0, &mut r);
        let z = random_vector(p.n, 1.0, &mut r);
        let w = random_vector(p.n, 1.0, &mut r);
        let hreal = r.gen_range(-1.0..1.0);
        let res = weyl_shift_check(&phi, hreal, &c, &u, &z, &w, tol)?;
        csv.push_str(&format!("{i},{},{},{}\n", p.d, p.n, fmt(res)));
    }
    Ok(vec![("weyl_shift.csv".into(), csv)])
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CocycleEvalParams {
    generator: GeneratorIn,
    f: StepIn,
    g: StepIn,
    times: Vec<f64>,
    #[serde(default)]
    identity_split: Option<f64>,
}

fn run_cocycle_eval(p: &CocycleEvalParams) -> Result<Vec<(String, String)>> {
    let (h, t) = p.generator.inner_data()?;
    let phi = build_inner_generator(&h, &t, TOL)?;
    let dims = phi.dims();
    let f = p.f.to_step(dims.n, "f")?;
    let g = p.g.to_step(dims.n, "g")?;
    let mut csv = String::from("t,row,col,re,im\n");
    for &time in &p.times {
        let e = eval_cocycle_element(&phi, &f, &g, time)?;
        for i in 0..e.action.rows() {
            for j in 0..e.action.cols() {
                let z = e.action[(i, j)];
                csv.push_str(&format!("{},{i},{j},{},{}\n", fmt(time), fmt(z.re), fmt(z.im)));
            }
        }
    }
    let mut outputs = vec![("cocycle_elements.csv".into(), csv)];
    if let Some(split) = p.identity_split {
        let total = p.times.iter().cloned().fold(0.0, f64::max);
        if split > 0.0 && split < total {
            let defect = qsflow::cocycle::check_cocycle_identity(&phi, &f, &g, split, total - split)?;
            outputs.push((
                "cocycle_identity.csv".into(),
                format!("s,t,defect\n{},{},{}\n", fmt(split), fmt(total - split), fmt(defect)),
            ));
        }
    }
    Ok(outputs)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToyfockParams {
    generator: GeneratorIn,
    coefficient: CoefficientIn,
    #[serde(default)]
    coefficient_g: Option<CoefficientIn>,
    x: MatrixIn,
    f: StepIn,
    g: StepIn,
    horizon: f64,
    slice_counts: Vec<usize>,
    bra: VectorIn,
    ket: VectorIn,
}

fn run_toyfock(p: &ToyfockParams, _seed: u64) -> Result<Vec<(String, String)>> {
    let (h, t) = p.generator.inner_data()?;
    let spec = InnerFlowSpec::new(h, t)?;
    let dims = spec.dims();
    let fc = coefficient_from(&p.coefficient, dims)?;
    let gc = match &p.coefficient_g {
        Some(g) => coefficient_from(g, dims)?,
        None => fc.clone(),
    };
    let x = to_matrix(&p.x, "x")?;
    let f = p.f.to_step(dims.n, "f")?;
    let g = p.g.to_step(dims.n, "g")?;
    let u = to_vector(&p.bra);
    let v = to_vector(&p.ket);
    let table = cross_validate(&spec, &fc, &gc, &x, &f, &g, &u, &v, p.horizon, &p.slice_counts)?;
    Ok(vec![("convergence.csv".into(), table.to_csv())])
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExclusionDemoParams {
    #[serde(default)]
    builtin: Option<String>,
    #[serde(default)]
    m: Option<usize>,
    #[serde(default)]
    eta: Option<Vec<f64>>,
    #[serde(default)]
    alpha: Option<MatrixIn>,
    #[serde(default)]
    beta: Option<MatrixIn>,
    #[serde(default)]
    tolerance: Option<f64>,
}

fn run_exclusion(p: &ExclusionDemoParams, _seed: u64) -> Result<Vec<(String, String)>> {
    let spec = match (&p.builtin, p.m) {
        (Some(name), None) => {
            if name == "exclusion-m2" {
                builtins::exclusion_m2()
            } else {
                bail!("unknown exclusion builtin '{name}'");
            }
        }
        (None, Some(m)) => {
            if m > 3 {
                bail!("exclusion demo supports m <= 3 sites (superoperators grow as 16^m)");
            }
            let eta = p.eta.clone().ok_or_else(|| anyhow!("missing eta"))?;
            let alpha = to_matrix(p.alpha.as_ref().ok_or_else(|| anyhow!("missing alpha"))?, "alpha")?;
            let beta = to_matrix(p.beta.as_ref().ok_or_else(|| anyhow!("missing beta"))?, "beta")?;
            ExclusionSpec::new(m, eta, alpha, beta)?
        }
        _ => bail!("give either a builtin name or explicit (m, eta, alpha, beta)"),
    };
    let tol = p.tolerance.unwrap_or(TOL);
    let report = verify_amplitude_addition(&spec, tol)?;
    let fb = exclusion_multiplier(&spec, &ComplexMatrix::zeros(1 << spec.m, 1 << spec.m), tol)?;
    let classify = classify_contractive(&fb, tol)?;

    let mut csv = String::from("quantity,value\n");
    csv.push_str(&format!("delta_residual,{}\n", fmt(report.delta_residual)));
    csv.push_str(&format!("tau_residual,{}\n", fmt(report.tau_residual)));
    csv.push_str(&format!("sites,{}\n", report.sites));
    csv.push_str(&format!("multiplier_isometric,{}\n", classify.is_isometric_coefficient));
    csv.push_str(&format!("q_norm,{}\n", fmt(classify.q_matrix.max_abs())));

    let mut h_csv = String::from("row,col,re,im\n");
    for i in 0..report.h_used.rows() {
        for j in 0..report.h_used.cols() {
            let z = report.h_used[(i, j)];
            h_csv.push_str(&format!("{i},{j},{},{}\n", fmt(z.re), fmt(z.im)));
        }
    }
    Ok(vec![("amplitude_addition.csv".into(), csv), ("h_compensator.csv".into(), h_csv)])
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TorusLambdaIn {
    #[serde(default)]
    turns: Option<(i64, i64)>,
    #[serde(default)]
    angle: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TorusDemoParams {
    lambda: TorusLambdaIn,
    c1: Cx,
    c2: Cx,
    monomials: Vec<(i64, i64)>,
    f: StepIn,
    g: StepIn,
    times: Vec<f64>,
    #[serde(default)]
    laplacian_betas: Option<[f64; 2]>,
    #[serde(default)]
    laplacian_degree_bound: Option<i64>,
}

fn run_torus(p: &TorusDemoParams) -> Result<Vec<(String, String)>> {
    let lambda = match (p.lambda.turns, p.lambda.angle) {
        (Some((num, den)), None) => Lambda::rational(num, den)?,
        (None, Some(a)) => Lambda::Angle(a),
        _ => bail!("lambda needs exactly one of turns or angle"),
    };
    let f = p.f.to_step(2, "f")?;
    let g = p.g.to_step(2, "g")?;
    let (c1, c2): (C64, C64) = (p.c1.into(), p.c2.into());
    let mut csv = String::from("t,m,n,re,im,modulus\n");
    for &time in &p.times {
        for &(m, n) in &p.monomials {
            let z = torus_cocycle_element(c1, c2, &f, &g, time, m, n)?;
            csv.push_str(&format!(
                "{},{m},{n},{},{},{}\n",
                fmt(time),
                fmt(z.re),
                fmt(z.im),
                fmt(z.norm())
            ));
        }
    }
    let mut outputs = vec![("torus_cocycle.csv".into(), csv)];

    if let Some(betas) = p.laplacian_betas {
        // sum-of-squares Laplacian identity with n_1 = (U + U*)/2, n_2 = (V + V*)/2
        let u = TorusElement::u(lambda);
        let v = TorusElement::v(lambda);
        let n1 = u.add(&u.adjoint())?.scale(qsflow::opcore::cr(0.5));
        let n2 = v.add(&v.adjoint())?.scale(qsflow::opcore::cr(0.5));
        let bound = p.laplacian_degree_bound.unwrap_or(3);
        let res = gauge_perturb_check(&betas, &[n1, n2], bound, 1e-12)?;
        outputs.push((
            "laplacian_identity.csv".into(),
            format!("beta1,beta2,degree_bound,residual\n{},{},{bound},{}\n", fmt(betas[0]), fmt(betas[1]), fmt(res)),
        ));
    }
    Ok(outputs)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresentationParams {
    #[serde(default)]
    builtin: Option<String>,
    #[serde(default)]
    source: Option<String>,
}

fn run_presentation(p: &PresentationParams) -> Result<Vec<(String, String)>> {
    let source = match (&p.builtin, &p.source) {
        (Some(name), None) => builtins::presentation_source(name)?,
        (None, Some(text)) => text.clone(),
        _ => bail!("give exactly one of builtin or source"),
    };
    let pres = parse_presentation(&source)?;
    let mut csv = String::from("generator,flag,balanced,witness_relation\n");
    for (j, name) in pres.generators.iter().enumerate() {
        let report = balance_check(&pres, j)?;
        let witness = report
            .witness
            .as_ref()
            .map(|(idx, _, _)| idx.to_string())
            .unwrap_or_default();
        csv.push_str(&format!(
            "{name},{:?},{},{witness}\n",
            pres.flags[j], report.balanced
        ));
    }
    Ok(vec![("balance.csv".into(), csv)])
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct McParams {
    m: i64,
    n: i64,
    c1: Cx,
    c2: Cx,
    t: f64,
    paths: u64,
}

fn run_mc(p: &McParams, seed: u64) -> Result<Vec<(String, String)>> {
    let rep = mc_randomized_action(p.m, p.n, p.c1.into(), p.c2.into(), p.t, p.paths, seed)?;
    let gap = (rep.estimate - rep.reference).norm();
    let mut csv = String::from(
        "paths,estimate_re,estimate_im,stderr,reference_re,reference_im,abs_gap,gap_over_stderr\n",
    );
    csv.push_str(&format!(
        "{},{},{},{},{},{},{},{}\n",
        rep.paths,
        fmt(rep.estimate.re),
        fmt(rep.estimate.im),
        fmt(rep.stderr),
        fmt(rep.reference.re),
        fmt(rep.reference.im),
        fmt(gap),
        fmt(gap / rep.stderr.max(1e-300))
    ));
    Ok(vec![("mc_randomized_action.csv".into(), csv)])
}
