//! Command implementations for the `lightlike` binary.
//!
//! Every command returns a [`Report`]; the binary only parses flags, picks
//! the output format and maps the outcome to an exit code.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use lightlike_core::algebra::{algebra_suite, AlgebraError};
use lightlike_core::calculus::{Evaluator, LightlikeStructure};
use lightlike_core::models::{
    builtin, emit_spec, from_spec, radical_endomorphism_record, sasakian_with, tanaka_record,
    tau_normalization_record, validate_structure, GeometrySpec, Model, ModelError,
};
use lightlike_core::normalize::{
    curvature_conditions, normalize, screen_uniqueness_check, NormalizeError,
};
use lightlike_core::report::{CheckRecord, Config, Report};
use lightlike_core::screen::{make_screen, random_screen_form, ScreenError};
use lightlike_core::tractor::curvature::{contract, CurvatureError, TractorCurvature};
use lightlike_core::tractor::laws::{eq_check, identity_suite, test_fields};
use lightlike_core::tractor::CompatibleStructure;

/// Amplitude of the random screen used for the screen-independence check.
const OTHER_SCREEN_AMPLITUDE: f64 = 0.3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Screen(#[from] ScreenError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 1 for unreadable or malformed input, 2 for failed validation, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) if e.is_parse() => 1,
            CliError::Model(ModelError::Validation(_) | ModelError::Axiom { .. }) => 2,
            CliError::Usage(_) => 1,
            _ => 3,
        }
    }
}

/// 0 when every record passes, 2 otherwise.
pub fn exit_code(report: &Report) -> i32 {
    if report.all_pass() {
        0
    } else {
        2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = report.to_json();
            s.push('\n');
            s
        }
        Format::Text => {
            let mut s = report.to_text();
            if let Some(r) = &report.result {
                s.push_str("result:\n");
                s.push_str(&serde_json::to_string_pretty(r).expect("result serialization"));
                s.push('\n');
            }
            s
        }
    }
}

/// Write to `out` or stdout.
pub fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Write {
            path: p.display().to_string(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Read a spec file without building it.
pub fn read_spec(path: &Path) -> Result<GeometrySpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text).map_err(ModelError::from)?)
}

/// Build a spec. A spec that agrees with the built-in Sasakian model gets
/// its contact data back, which the Tanaka comparison needs.
pub fn build(spec: &GeometrySpec, cfg: &Config) -> Result<Model, CliError> {
    let model = from_spec(spec, cfg)?;
    if spec.name == "sasakian" && spec.dim % 2 == 1 && spec.dim >= 3 {
        if let Ok(s) = sasakian_with(spec.dim / 2, cfg) {
            if same_model(&model, &s, cfg) {
                return Ok(s);
            }
        }
    }
    Ok(model)
}

/// Same chart, and h, Z, τ₀ and the structure agree at samples.
fn same_model(a: &Model, b: &Model, cfg: &Config) -> bool {
    let (sa, sb) = (&a.structure, &b.structure);
    let (ca, cb) = (&sa.chart, &sb.chart);
    if ca.names() != cb.names() || ca.domain() != cb.domain() || ca.seed() != cb.seed() {
        return false;
    }
    let n = sa.n();
    let mut eqs = Vec::new();
    for i in 0..n {
        for j in 0..=i {
            eqs.push((sa.h.get(i, j), sb.h.get(i, j)));
        }
    }
    eqs.extend(sa.z.0.iter().copied().zip(sb.z.0.iter().copied()));
    eqs.extend(a.tau0.0.iter().copied().zip(b.tau0.0.iter().copied()));
    match (&a.compatible, &b.compatible) {
        (Some(x), Some(y)) => {
            let (x, y) = (x.base(), y.base());
            for k in 0..n {
                eqs.extend(x.d[k].iter().copied().zip(y.d[k].iter().copied()));
                for (rx, ry) in x.gamma[k].iter().zip(&y.gamma[k]) {
                    eqs.extend(rx.iter().copied().zip(ry.iter().copied()));
                }
            }
        }
        (None, None) => {}
        _ => return false,
    }
    eq_check("same-model", "plumbing", sa, cfg, cfg.strict_tol, &eqs).pass
}

/// Load a spec. Validation failures become a failing report instead of an
/// error so that the offending records are shown.
fn load(path: &Path, command: &str, cfg: &Config) -> Result<Result<Model, Report>, CliError> {
    let spec = read_spec(path)?;
    match build(&spec, cfg) {
        Ok(m) => Ok(Ok(m)),
        Err(CliError::Model(ModelError::Validation(recs))) => {
            let mut r = Report::new(command, Some(&spec.name), cfg);
            r.extend(recs);
            Ok(Err(r))
        }
        Err(e) => Err(e),
    }
}

/// A_Z reported against Id and 0 with a note naming the match.
pub fn radical_endomorphism_info(model: &Model, cfg: &Config) -> CheckRecord {
    let st = &model.structure;
    let id = radical_endomorphism_record(st, &model.screen, 1.0, "radical-endomorphism", cfg);
    let zero = radical_endomorphism_record(st, &model.screen, 0.0, "radical-endomorphism", cfg);
    let (rec, note) = if id.pass {
        (id, "A_Z = Id (Z is homothetic)")
    } else if zero.pass {
        (zero, "A_Z = 0 (Z is Killing)")
    } else {
        (id, "A_Z is neither Id nor 0; residual is measured against Id")
    };
    rec.info().note(note)
}

pub fn cmd_validate(path: &Path, cfg: &Config) -> Result<Report, CliError> {
    let model = match load(path, "validate", cfg)? {
        Ok(m) => m,
        Err(r) => return Ok(r),
    };
    let st = &model.structure;
    let mut r = Report::new("validate", Some(&model.name), cfg);
    r.extend(validate_structure(st, cfg));
    r.push(tau_normalization_record(st, &model.tau0, cfg));
    r.push(radical_endomorphism_info(&model, cfg));
    if model.compatible.is_none() {
        r.push(CheckRecord::skipped("structure", "(∇, D) at τ₀", "no structure"));
    }
    Ok(r)
}

pub fn cmd_laws(path: &Path, cfg: &Config) -> Result<Report, CliError> {
    let model = match load(path, "laws", cfg)? {
        Ok(m) => m,
        Err(r) => return Ok(r),
    };
    let st = &model.structure;
    let mut r = Report::new("laws", Some(&model.name), cfg);
    r.push(radical_endomorphism_info(&model, cfg));
    r.extend(identity_suite(st, &model.tau0, model.compatible.as_ref(), cfg)?);
    if let Some(t) = tanaka_record(&model, cfg) {
        r.push(t);
    }
    Ok(r)
}

pub fn cmd_normalize(path: &Path, cfg: &Config) -> Result<Report, CliError> {
    let model = match load(path, "normalize", cfg)? {
        Ok(m) => m,
        Err(r) => return Ok(r),
    };
    let st = &model.structure;
    let mut r = Report::new("normalize", Some(&model.name), cfg);
    let out = normalize(st, &model.screen, cfg)?;
    r.extend(out.records.iter().cloned());
    if let Some(cs) = &out.structure {
        let other = other_screen(st, &model, cfg)?;
        r.push(screen_uniqueness_check(st, cs, &other, cfg)?);
    }
    r.result = Some(match out.result() {
        Some(res) => serde_json::to_value(res).expect("result serialization"),
        None => json!({ "refused": out.refused }),
    });
    Ok(r)
}

fn other_screen(
    st: &LightlikeStructure,
    model: &Model,
    cfg: &Config,
) -> Result<lightlike_core::screen::ScreenForm, CliError> {
    let seed = cfg.seed.unwrap_or(st.chart.seed()) ^ 0x07be;
    let tau = random_screen_form(st, &model.tau0, seed, OTHER_SCREEN_AMPLITUDE);
    Ok(make_screen(st, &tau)?)
}

#[derive(Clone, Debug, Default)]
pub struct CurvatureOptions {
    /// Add ε times a seeded skew perturbation to Γ.
    pub perturb: Option<f64>,
    /// Extra random polynomial fields for the table.
    pub random_fields: usize,
}

#[derive(Serialize)]
struct XiRow {
    v: String,
    w: String,
    /// R(V,W)ξ in the splitting of the base screen: (α, x, β).
    alpha: f64,
    x: Vec<f64>,
    beta: f64,
    /// 𝐓^ω(V,W) in coordinates.
    t_omega: Vec<f64>,
}

pub fn cmd_curvature(path: &Path, cfg: &Config, opts: &CurvatureOptions) -> Result<Report, CliError> {
    let model = match load(path, "curvature", cfg)? {
        Ok(m) => m,
        Err(r) => return Ok(r),
    };
    let st = &model.structure;
    let mut r = Report::new("curvature", Some(&model.name), cfg);
    let (cs, source) = match &model.compatible {
        Some(cs) => (cs.clone(), "spec"),
        None => {
            let out = normalize(st, &model.screen, cfg)?;
            match out.structure {
                Some(cs) => (cs, "normalization"),
                None => {
                    r.extend(out.records);
                    r.result = Some(json!({ "refused": out.refused }));
                    return Ok(r);
                }
            }
        }
    };
    let seed = cfg.seed.unwrap_or(st.chart.seed());
    let cs = match opts.perturb {
        Some(eps) => cs.perturbed(eps, seed),
        None => cs,
    };
    let curv = TractorCurvature::compute(st, cs.base(), cfg.node_budget, cfg.fd_fallback)?;
    r.extend(curvature_conditions(st, &cs, &curv, cfg));
    let table = xi_table(st, &cs, &curv, opts, cfg)?;
    r.result = Some(json!({
        "structure": source,
        "perturbation": opts.perturb,
        "fallback": curv.fallback,
        "max_nodes": curv.max_nodes,
        "point": table.0,
        "xi_curvature": table.1,
    }));
    Ok(r)
}

/// R(V,W)ξ and 𝐓^ω(V,W) at the first sample point for all field pairs.
fn xi_table(
    st: &LightlikeStructure,
    cs: &CompatibleStructure,
    curv: &TractorCurvature,
    opts: &CurvatureOptions,
    cfg: &Config,
) -> Result<(Vec<f64>, Vec<XiRow>), CliError> {
    let seed = cfg.seed.unwrap_or(st.chart.seed());
    let fields = test_fields(st, cs.screen(), opts.random_fields, seed);
    let point = Config { samples: 1, ..cfg.clone() }.points(&st.chart).remove(0);
    let r = curv
        .eval_at(&st.chart, &point, cfg.fd_step)
        .map_err(ModelError::from)?;
    let mut ev: Evaluator = st.chart.evaluator(&point);
    let values = fields
        .iter()
        .map(|(_, f)| f.eval(&mut ev))
        .collect::<Result<Vec<_>, _>>()
        .map_err(ModelError::from)?;
    let m = st.m();
    let mut rows = Vec::new();
    for i in 0..fields.len() {
        for j in (i + 1)..fields.len() {
            let rx = contract(&r, &values[i], &values[j]).column(0).into_owned();
            let t = cs.base().t_omega(st, &fields[i].1, &fields[j].1);
            rows.push(XiRow {
                v: fields[i].0.clone(),
                w: fields[j].0.clone(),
                alpha: rx[0],
                x: (0..m).map(|k| rx[1 + k]).collect(),
                beta: rx[m + 1],
                t_omega: t.eval(&mut ev).map_err(ModelError::from)?,
            });
        }
    }
    Ok((point, rows))
}

pub fn cmd_model_algebra(m: usize, cfg: &Config) -> Result<Report, CliError> {
    let mut r = Report::new("model-algebra", Some(&format!("so({},1), m={m}", m + 1)), cfg);
    r.extend(algebra_suite(m, cfg)?);
    Ok(r)
}

/// JSON spec of a built-in model.
pub fn cmd_emit_spec(model: &str, size: usize) -> Result<String, CliError> {
    let m = builtin(model, size)?;
    let mut s = serde_json::to_string_pretty(&emit_spec(&m)).expect("spec serialization");
    s.push('\n');
    Ok(s)
}

/// Path of a file inside the shipped `specs/` directory.
pub fn shipped_spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../specs")
        .join(name)
}
