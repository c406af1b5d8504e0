//! Built-in geometries and the JSON geometry-spec format.
//!
//! Built-ins: the future lightlike cone (flat model), a degenerate
//! hyperplane of Minkowski space with its flat structure, and the standard
//! Sasakian structure on ℝ^{2n+1} with the lightlike metric g − η⊗η.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calculus::{
    christoffel, covariant, d_form_apply, lie_derivative_metric, parse_expr, Chart, ChartError,
    DomainError, LightlikeStructure, MetricField, OneForm, ParseError, ScalarExpr, VectorField,
};
use crate::report::{sample_check, CheckRecord, Config};
use crate::screen::{make_screen, project, ScreenError, ScreenForm};
use crate::tractor::laws::{eq_check, test_fields};
use crate::tractor::{CompatibleStructure, Matrix, TractorError};

pub const SPEC_VERSION: u32 = 1;
/// Sample count for structure validation of builders and loaded specs.
pub const VALIDATION_SAMPLES: usize = 50;
/// Sasakian axioms must hold to this residual before a structure is emitted.
pub const AXIOM_TOL: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad spec: {0}")]
    Spec(String),
    #[error("cannot parse {entry}: {source}")]
    Parse { entry: String, source: ParseError },
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("validation failed: {}", summarize(.0))]
    Validation(Vec<CheckRecord>),
    #[error("Sasakian axiom '{axiom}' fails with residual {residual:e}")]
    Axiom { axiom: String, residual: f64 },
    #[error(transparent)]
    Screen(#[from] ScreenError),
    #[error(transparent)]
    Tractor(#[from] TractorError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("model needs m >= 2 (got {0})")]
    TooSmall(usize),
}

fn summarize(recs: &[CheckRecord]) -> String {
    recs.iter()
        .filter(|r| r.failing())
        .map(|r| format!("{} (residual {:e})", r.name, r.max_residual))
        .collect::<Vec<_>>()
        .join(", ")
}

impl ModelError {
    /// Parse and IO problems versus failed geometric validation.
    pub fn is_parse(&self) -> bool {
        matches!(
            self,
            ModelError::Io { .. }
                | ModelError::Json(_)
                | ModelError::Spec(_)
                | ModelError::Parse { .. }
                | ModelError::Chart(_)
        )
    }
}

/// Data kept from the Sasakian builder for the checks that need g.
#[derive(Clone, Debug)]
pub struct SasakianData {
    pub g: MetricField,
    pub eta: OneForm,
    /// Levi-Civita Christoffel symbols of g, `[k][a][b]`.
    pub christoffel: Vec<Vec<Vec<ScalarExpr>>>,
    /// φ(∂_a) for each coordinate direction.
    pub phi: Vec<VectorField>,
}

impl SasakianData {
    pub fn phi_of(&self, v: &VectorField) -> VectorField {
        let n = v.dim();
        VectorField::combination(n, v.0.iter().copied().zip(self.phi.iter().cloned()))
    }

    pub fn levi_civita(&self, chart: &Chart, v: &VectorField, w: &VectorField) -> VectorField {
        covariant(chart, &self.christoffel, v, w)
    }

    /// Ψ(V,W) = g(V, φW)
    pub fn psi(&self, v: &VectorField, w: &VectorField) -> ScalarExpr {
        self.g.apply(v, &self.phi_of(w))
    }

    /// ∇*_V W = ∇^g_V W + η(V)φW + η(W)φV + Ψ(V,W)Z
    pub fn tanaka(&self, st: &LightlikeStructure, v: &VectorField, w: &VectorField) -> VectorField {
        self.levi_civita(&st.chart, v, w)
            .add(&self.phi_of(w).scale(self.eta.apply(v)))
            .add(&self.phi_of(v).scale(self.eta.apply(w)))
            .add(&st.z.scale(self.psi(v, w)))
    }
}

/// A geometry with its base screen form and, optionally, a structure.
#[derive(Clone, Debug)]
pub struct Model {
    pub name: String,
    pub structure: LightlikeStructure,
    pub tau0: OneForm,
    pub screen: ScreenForm,
    pub compatible: Option<CompatibleStructure>,
    pub sasakian: Option<SasakianData>,
}

fn constant(v: f64) -> ScalarExpr {
    ScalarExpr::constant(v)
}

/// Residual checks making (h, Z) a lightlike structure.
pub fn validate_structure(st: &LightlikeStructure, cfg: &Config) -> Vec<CheckRecord> {
    let cfg = Config {
        samples: cfg.samples.max(VALIDATION_SAMPLES),
        ..cfg.clone()
    };
    let rank_tol = cfg.rank_tol;
    let mut out = Vec::new();
    out.push(sample_check(
        "radical",
        "h(Z, ·) = 0",
        &st.chart,
        &cfg,
        rank_tol,
        |_, p| Ok(st.residuals_at(p)?.radical),
    ));
    out.push(sample_check(
        "rank",
        "exactly one eigenvalue of h below the rank tolerance",
        &st.chart,
        &cfg,
        rank_tol,
        |_, p| {
            let r = st.residuals_at(p)?;
            // fails when the null eigenvalue is too big or a second one is too small
            Ok(if r.min_positive > rank_tol {
                r.null_eigenvalue
            } else {
                f64::INFINITY
            })
        },
    ));
    out.push(sample_check(
        "positive-semidefinite",
        "h ≥ 0",
        &st.chart,
        &cfg,
        rank_tol,
        |_, p| Ok(-st.residuals_at(p)?.negative),
    ));
    out.push(sample_check(
        "radical-field-nonvanishing",
        "Z ≠ 0",
        &st.chart,
        &cfg,
        1.0,
        |_, p| {
            let z = st.residuals_at(p)?.z_norm;
            Ok(if z > 1e-9 { 0.0 } else { f64::INFINITY })
        },
    ));
    out
}

/// τ(Z) = 1 at validation samples.
pub fn tau_normalization_record(st: &LightlikeStructure, tau: &OneForm, cfg: &Config) -> CheckRecord {
    let cfg = Config {
        samples: cfg.samples.max(VALIDATION_SAMPLES),
        ..cfg.clone()
    };
    eq_check(
        "screen-form-normalized",
        "τ₀(Z) = 1",
        st,
        &cfg,
        cfg.strict_tol,
        &[(tau.apply(&st.z), ScalarExpr::ONE)],
    )
}

/// A_Z in the frame of `screen` compared with `target`·Id.
pub fn radical_endomorphism_record(
    st: &LightlikeStructure,
    screen: &ScreenForm,
    target: f64,
    name: &str,
    cfg: &Config,
) -> CheckRecord {
    let a = crate::screen::radical_endomorphism(st, screen);
    let m = st.m();
    let eqs: Vec<_> = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| (a[i][j], constant(if i == j { target } else { 0.0 })))
        .collect();
    eq_check(name, "A_Z in an orthonormal screen frame", st, cfg, cfg.strict_tol, &eqs)
}

fn require_valid(recs: Vec<CheckRecord>) -> Result<(), ModelError> {
    if recs.iter().any(|r| r.failing()) {
        Err(ModelError::Validation(recs))
    } else {
        Ok(())
    }
}

/// Future lightlike cone in 𝕃^{m+2} in the chart (t, u_1…u_m):
/// v = e^t (σ(u), 1) with σ inverse stereographic projection, so
/// h = e^{2t} · 4/(1+|u|²)² · Σ du_i², Z = ∂_t, τ₀ = dt.
pub fn cone(m: usize) -> Result<Model, ModelError> {
    if m < 2 {
        return Err(ModelError::TooSmall(m));
    }
    let n = m + 1;
    let mut names = vec!["t".to_string()];
    names.extend((1..=m).map(|i| format!("u{i}")));
    let mut domain = vec![(-1.0, 1.0)];
    domain.extend(std::iter::repeat_n((-2.0, 2.0), m));
    let chart = Chart::new(names, domain, 20250801)?;
    let conf = cone_conformal_factor(&chart);
    let h = MetricField::from_fn(n, |i, j| if i == j && i > 0 { conf } else { ScalarExpr::ZERO });
    let st = LightlikeStructure::new(chart, h, VectorField::coordinate(n, 0));
    let tau0 = OneForm::coordinate(n, 0);
    finish("cone", st, tau0, None)
}

/// e^{2t} · 4/(1+|u|²)²
fn cone_conformal_factor(chart: &Chart) -> ScalarExpr {
    let t = chart.coord(0);
    let u2: ScalarExpr = (1..chart.dim()).map(|i| chart.coord(i).powi(2)).sum();
    (2.0 * t).exp() * 4.0 / (1.0 + u2).powi(2)
}

/// The embedding v: N → 𝕃^{m+2} of the cone chart (last slot timelike).
pub fn cone_embedding(chart: &Chart) -> Vec<ScalarExpr> {
    let t = chart.coord(0);
    let m = chart.dim() - 1;
    let u2: ScalarExpr = (1..=m).map(|i| chart.coord(i).powi(2)).sum();
    let denom = 1.0 + u2;
    let et = t.exp();
    let mut v: Vec<ScalarExpr> = (1..=m).map(|i| et * (2.0 * chart.coord(i)) / denom).collect();
    v.push(et * (u2 - 1.0) / denom);
    v.push(et);
    v
}

/// max |⟨∂_a v, ∂_b v⟩ − h_ab| over samples, with ⟨,⟩ of signature (+…+,−).
pub fn cone_pullback_record(model: &Model, cfg: &Config) -> CheckRecord {
    let st = &model.structure;
    let chart = &st.chart;
    let v = cone_embedding(chart);
    let k = v.len();
    let n = chart.dim();
    let dv: Vec<Vec<ScalarExpr>> = (0..n)
        .map(|a| v.iter().map(|&c| chart.partial(c, a)).collect())
        .collect();
    let mut eqs = Vec::new();
    for a in 0..n {
        for b in 0..=a {
            let pull: ScalarExpr = (0..k)
                .map(|c| {
                    let s = if c + 1 == k { -1.0 } else { 1.0 };
                    s * dv[a][c] * dv[b][c]
                })
                .sum();
            eqs.push((pull, st.h.get(a, b)));
        }
    }
    let null: ScalarExpr = (0..k)
        .map(|c| if c + 1 == k { -(v[c] * v[c]) } else { v[c] * v[c] })
        .sum();
    eqs.push((null, ScalarExpr::ZERO));
    eq_check(
        "cone-pullback",
        "h is the pullback of the Minkowski metric along v = e^t(σ(u), 1), v null",
        st,
        cfg,
        cfg.strict_tol,
        &eqs,
    )
}

/// Degenerate hyperplane: h = Σ_{i≥1} dr_i², Z = ∂_{r0}, α = dr₀,
/// ∇^α flat and D^α = P^α.
pub fn hyperplane(m: usize) -> Result<Model, ModelError> {
    if m < 2 {
        return Err(ModelError::TooSmall(m));
    }
    let n = m + 1;
    let names = (0..n).map(|i| format!("r{i}")).collect();
    let chart = Chart::new(names, vec![(-1.0, 1.0); n], 20250802)?;
    let h = MetricField::from_fn(n, |i, j| if i == j && i > 0 { ScalarExpr::ONE } else { ScalarExpr::ZERO });
    let st = LightlikeStructure::new(chart, h, VectorField::coordinate(n, 0));
    let tau0 = OneForm::coordinate(n, 0);
    let screen = make_screen(&st, &tau0)?;
    let gamma = vec![vec![vec![ScalarExpr::ZERO; m]; m]; n];
    let d = (0..n)
        .map(|a| {
            let pa = project(&st, &tau0, &VectorField::coordinate(n, a));
            screen.components(&st, &pa)
        })
        .collect();
    let cs = CompatibleStructure::from_upper(screen, gamma, d)?;
    finish("hyperplane", st, tau0, Some(cs))
}

/// Standard Sasakian structure on ℝ^{2n+1} with coordinates
/// (x_1…x_n, y_1…y_n, z): η = ½(dz − Σ y_i dx_i), Z = 2∂_z,
/// g = η⊗η + ¼ Σ(dx_i² + dy_i²), φ = −∇^g Z. The axioms are checked before
/// the structure is built.
pub fn sasakian(n: usize) -> Result<Model, ModelError> {
    sasakian_with(n, &Config::default())
}

pub fn sasakian_with(n: usize, cfg: &Config) -> Result<Model, ModelError> {
    if n < 1 {
        return Err(ModelError::TooSmall(0));
    }
    let dim = 2 * n + 1;
    let mut names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    names.extend((1..=n).map(|i| format!("y{i}")));
    names.push("z".into());
    let chart = Chart::new(names, vec![(-1.0, 1.0); dim], 20250803)?;
    let mut eta = vec![ScalarExpr::ZERO; dim];
    for i in 0..n {
        eta[i] = -0.5 * chart.coord(n + i);
    }
    eta[dim - 1] = constant(0.5);
    let eta = OneForm(eta);
    let g = MetricField::from_fn(dim, |a, b| {
        let flat = if a == b && a < 2 * n { 0.25 } else { 0.0 };
        eta.0[a] * eta.0[b] + flat
    });
    let z = VectorField::coordinate(dim, dim - 1).scale(constant(2.0));
    let chr = christoffel(&chart, &g)?;
    let phi: Vec<VectorField> = (0..dim)
        .map(|a| covariant(&chart, &chr, &VectorField::coordinate(dim, a), &z).scale(constant(-1.0)))
        .collect();
    let data = SasakianData {
        g: g.clone(),
        eta: eta.clone(),
        christoffel: chr,
        phi,
    };
    // g − η⊗η in closed form; the axioms compare the two
    let h = MetricField::from_fn(dim, |a, b| constant(if a == b && a < 2 * n { 0.25 } else { 0.0 }));
    let st = LightlikeStructure::new(chart, h, z);

    for rec in sasakian_axioms(&st, &data, cfg) {
        if rec.failing() {
            return Err(ModelError::Axiom {
                axiom: rec.name.clone(),
                residual: rec.max_residual,
            });
        }
    }

    let screen = make_screen(&st, &eta)?;
    let m = screen.m();
    let gamma: Vec<Matrix> = (0..dim)
        .map(|a| {
            let da = VectorField::coordinate(dim, a);
            let ea = eta.0[a];
            let moved: Vec<VectorField> = screen
                .frame
                .iter()
                .map(|e| data.levi_civita(&st.chart, &da, e).add(&data.phi_of(e).scale(ea)))
                .collect();
            (0..m)
                .map(|i| (0..m).map(|j| g.apply(&moved[i], &screen.frame[j])).collect())
                .collect()
        })
        .collect();
    let d = (0..dim)
        .map(|a| screen.components(&st, &data.phi[a]))
        .collect();
    let cs = CompatibleStructure::antisymmetrized(screen, gamma, d)?;
    let mut model = finish("sasakian", st, eta, Some(cs))?;
    model.sasakian = Some(data);
    Ok(model)
}

/// The defining axioms and derived relations of a Sasakian manifold.
pub fn sasakian_axioms(st: &LightlikeStructure, s: &SasakianData, cfg: &Config) -> Vec<CheckRecord> {
    let chart = &st.chart;
    let dim = chart.dim();
    let z = &st.z;
    let coords: Vec<VectorField> = (0..dim).map(|a| VectorField::coordinate(dim, a)).collect();
    let tol = AXIOM_TOL;
    let mut out = Vec::new();

    let killing = lie_derivative_metric(chart, &s.g, z);
    let eqs: Vec<_> = (0..dim)
        .flat_map(|a| (0..=a).map(move |b| (a, b)))
        .map(|(a, b)| (killing.get(a, b), ScalarExpr::ZERO))
        .collect();
    out.push(eq_check("sasakian-killing", "L_Z g = 0", st, cfg, tol, &eqs));

    let eqs = vec![(s.g.apply(z, z), ScalarExpr::ONE)];
    out.push(eq_check("sasakian-unit", "g(Z,Z) = 1", st, cfg, tol, &eqs));

    let mut eqs = Vec::new();
    for v in &coords {
        let lhs = s.phi_of(&s.phi_of(v));
        let rhs = v.scale(constant(-1.0)).add(&z.scale(s.eta.apply(v)));
        eqs.extend(lhs.0.iter().copied().zip(rhs.0.iter().copied()));
    }
    out.push(eq_check("sasakian-phi-square", "φ² = −Id + η⊗Z", st, cfg, tol, &eqs));

    let mut eqs = Vec::new();
    for v in &coords {
        for w in &coords {
            let lhs = s
                .levi_civita(chart, v, &s.phi_of(w))
                .sub(&s.phi_of(&s.levi_civita(chart, v, w)));
            let rhs = z.scale(s.g.apply(v, w)).sub(&v.scale(s.g.apply(w, z)));
            eqs.extend(lhs.0.iter().copied().zip(rhs.0.iter().copied()));
        }
    }
    out.push(eq_check("sasakian-nabla-phi", "(∇_V φ)W = g(V,W)Z − g(W,Z)V", st, cfg, tol, &eqs));

    let eqs = vec![]
        .into_iter()
        .chain(coords.iter().map(|v| (s.eta.apply(v), s.g.apply(z, v))))
        .collect::<Vec<_>>();
    out.push(eq_check("sasakian-eta-dual", "η = g(Z, ·)", st, cfg, tol, &eqs));

    let (mut deta, mut neta, mut compat) = (Vec::new(), Vec::new(), Vec::new());
    for v in &coords {
        for w in &coords {
            let psi = s.psi(v, w);
            deta.push((d_form_apply(chart, &s.eta, v, w), 2.0 * psi));
            let nabla = chart.directional(v, s.eta.apply(w)) - s.eta.apply(&s.levi_civita(chart, v, w));
            neta.push((nabla, psi));
            let rhs = s.g.apply(&s.phi_of(v), &s.phi_of(w)) + s.eta.apply(v) * s.eta.apply(w);
            compat.push((s.g.apply(v, w), rhs));
        }
    }
    out.push(eq_check("sasakian-d-eta", "dη(V,W) = 2g(V, φW)", st, cfg, tol, &deta));
    out.push(eq_check("sasakian-nabla-eta", "(∇_V η)W = g(V, φW)", st, cfg, tol, &neta));
    let mut lightlike = Vec::new();
    for a in 0..dim {
        for b in 0..=a {
            lightlike.push((st.h.get(a, b), s.g.get(a, b) - s.eta.0[a] * s.eta.0[b]));
        }
    }
    out.push(eq_check("sasakian-lightlike-metric", "h = g − η⊗η", st, cfg, tol, &lightlike));
    out.push(eq_check("sasakian-phi-isometry", "g(V,W) = g(φV,φW) + η(V)η(W)", st, cfg, tol, &compat));
    out
}

/// ∇̃^η_V W = ∇*_V W + η(W)P^η(V) for the Galilean extension of ∇^η.
pub fn tanaka_record(model: &Model, cfg: &Config) -> Option<CheckRecord> {
    let s = model.sasakian.as_ref()?;
    let cs = model.compatible.as_ref()?;
    let st = &model.structure;
    let seed = cfg.seed.unwrap_or(st.chart.seed());
    let fields = test_fields(st, &model.screen, 2, seed);
    let mut eqs = Vec::new();
    for (_, v) in &fields {
        for (_, w) in &fields {
            let lhs = cs.base().galilean(st, v, w);
            let rhs = s
                .tanaka(st, v, w)
                .add(&project(st, &s.eta, v).scale(s.eta.apply(w)));
            eqs.extend(lhs.0.iter().copied().zip(rhs.0.iter().copied()));
        }
    }
    Some(eq_check(
        "galilean-tanaka-relation",
        "∇̃^η_V W = ∇*_V W + η(W)P^η(V)",
        st,
        cfg,
        cfg.law_tol,
        &eqs,
    ))
}

fn finish(
    name: &str,
    st: LightlikeStructure,
    tau0: OneForm,
    cs: Option<CompatibleStructure>,
) -> Result<Model, ModelError> {
    let cfg = Config::default();
    let mut recs = validate_structure(&st, &cfg);
    recs.push(tau_normalization_record(&st, &tau0, &cfg));
    require_valid(recs)?;
    let screen = match &cs {
        Some(c) => c.screen().clone(),
        None => make_screen(&st, &tau0)?,
    };
    Ok(Model {
        name: name.into(),
        structure: st,
        tau0,
        screen,
        compatible: cs,
        sasakian: None,
    })
}

/// Built-in model by name: `cone`, `hyperplane` (size m) or `sasakian` (size n).
pub fn builtin(name: &str, size: usize) -> Result<Model, ModelError> {
    match name {
        "cone" => cone(size),
        "hyperplane" => hyperplane(size),
        "sasakian" => sasakian(size),
        other => Err(ModelError::Spec(format!("unknown model '{other}'"))),
    }
}

/// A τ₀ with τ₀(Z) = 1 when a spec gives none: Σ Z^a dx^a / Σ (Z^a)².
pub fn default_screen_form(st: &LightlikeStructure) -> OneForm {
    let z = &st.z;
    let norm2: ScalarExpr = z.0.iter().map(|&c| c * c).sum();
    OneForm(z.0.iter().map(|&c| c / norm2).collect())
}

// ---------------------------------------------------------------------------
// Geometry spec files

/// Structure data relative to the frame that Gram–Schmidt builds from τ₀
/// over the coordinate fields in order.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StructureSpec {
    /// `gamma[a][i][j]` = h(∇_{∂_a} E_i, E_j); only i < j is read.
    pub gamma: Vec<Vec<Vec<String>>>,
    /// `D0[a][j]` = h(D(∂_a), E_j)
    #[serde(rename = "D0")]
    pub d0: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GeometrySpec {
    pub spec_version: u32,
    pub name: String,
    pub dim: usize,
    pub coords: Vec<String>,
    /// Lower triangle: row i has i+1 entries.
    pub metric: Vec<Vec<String>>,
    #[serde(rename = "Z")]
    pub z: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau0: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureSpec>,
    pub domain: Vec<[f64; 2]>,
    pub seed: u64,
}

fn strings(v: &[ScalarExpr]) -> Vec<String> {
    v.iter().map(|e| e.to_string()).collect()
}

/// Serialize a model.
pub fn emit_spec(model: &Model) -> GeometrySpec {
    let st = &model.structure;
    let chart = &st.chart;
    GeometrySpec {
        spec_version: SPEC_VERSION,
        name: model.name.clone(),
        dim: chart.dim(),
        coords: chart.names().to_vec(),
        metric: st.h.lower_rows().iter().map(|r| strings(r)).collect(),
        z: strings(&st.z.0),
        tau0: Some(strings(&model.tau0.0)),
        structure: model.compatible.as_ref().map(|cs| StructureSpec {
            gamma: cs
                .base()
                .gamma
                .iter()
                .map(|g| g.iter().map(|r| strings(r)).collect())
                .collect(),
            d0: cs.base().d.iter().map(|r| strings(r)).collect(),
        }),
        domain: chart.domain().iter().map(|&(a, b)| [a, b]).collect(),
        seed: chart.seed(),
    }
}

fn parse_entry(src: &str, coords: &[String], entry: String) -> Result<ScalarExpr, ModelError> {
    parse_expr(src, coords).map_err(|source| ModelError::Parse { entry, source })
}

fn parse_vec(src: &[String], coords: &[String], what: &str) -> Result<Vec<ScalarExpr>, ModelError> {
    src.iter()
        .enumerate()
        .map(|(i, s)| parse_entry(s, coords, format!("{what}[{i}]")))
        .collect()
}

/// Build and validate a model from a parsed spec.
pub fn from_spec(spec: &GeometrySpec, cfg: &Config) -> Result<Model, ModelError> {
    if spec.spec_version != SPEC_VERSION {
        return Err(ModelError::Spec(format!(
            "unsupported spec_version {} (expected {SPEC_VERSION})",
            spec.spec_version
        )));
    }
    let n = spec.dim;
    let arity = |what: &str, got: usize| {
        if got == n {
            Ok(())
        } else {
            Err(ModelError::Spec(format!("{what} has {got} entries, dim is {n}")))
        }
    };
    arity("coords", spec.coords.len())?;
    arity("domain", spec.domain.len())?;
    arity("Z", spec.z.len())?;
    arity("metric", spec.metric.len())?;
    let domain = spec.domain.iter().map(|d| (d[0], d[1])).collect();
    let chart = Chart::new(spec.coords.clone(), domain, spec.seed)?;
    let coords = chart.names().to_vec();
    let mut rows = Vec::with_capacity(n);
    for (i, row) in spec.metric.iter().enumerate() {
        if row.len() != i + 1 {
            return Err(ModelError::Spec(format!(
                "metric row {i} has {} entries, expected {} (lower triangle)",
                row.len(),
                i + 1
            )));
        }
        let parsed = row
            .iter()
            .enumerate()
            .map(|(j, s)| parse_entry(s, &coords, format!("metric[{i}][{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(parsed);
    }
    let h = MetricField::from_lower(rows).ok_or_else(|| ModelError::Spec("metric shape".into()))?;
    let z = VectorField(parse_vec(&spec.z, &coords, "Z")?);
    let st = LightlikeStructure::new(chart, h, z);
    let tau0 = match &spec.tau0 {
        Some(t) => {
            arity("tau0", t.len())?;
            OneForm(parse_vec(t, &coords, "tau0")?)
        }
        None => {
            if spec.structure.is_some() {
                return Err(ModelError::Spec("a structure requires tau0".into()));
            }
            default_screen_form(&st)
        }
    };
    let mut recs = validate_structure(&st, cfg);
    recs.push(tau_normalization_record(&st, &tau0, cfg));
    require_valid(recs)?;
    let screen = make_screen(&st, &tau0)?;
    let m = st.m();
    let cs = match &spec.structure {
        None => None,
        Some(s) => {
            if s.gamma.len() != n || s.d0.len() != n {
                return Err(ModelError::Spec(format!(
                    "structure needs {n} entries per coordinate direction"
                )));
            }
            let mut gamma = Vec::with_capacity(n);
            for (a, g) in s.gamma.iter().enumerate() {
                if g.len() != m || g.iter().any(|r| r.len() != m) {
                    return Err(ModelError::Spec(format!("gamma[{a}] must be {m}x{m}")));
                }
                let mut mat = vec![vec![ScalarExpr::ZERO; m]; m];
                for i in 0..m {
                    for j in (i + 1)..m {
                        mat[i][j] = parse_entry(&g[i][j], &coords, format!("structure.gamma[{a}][{i}][{j}]"))?;
                    }
                }
                gamma.push(mat);
            }
            let mut d = Vec::with_capacity(n);
            for (a, row) in s.d0.iter().enumerate() {
                if row.len() != m {
                    return Err(ModelError::Spec(format!("D0[{a}] must have {m} entries")));
                }
                d.push(parse_vec(row, &coords, &format!("structure.D0[{a}]"))?);
            }
            Some(CompatibleStructure::from_upper(screen.clone(), gamma, d)?)
        }
    };
    Ok(Model {
        name: spec.name.clone(),
        structure: st,
        tau0,
        screen,
        compatible: cs,
        sasakian: None,
    })
}

pub fn load_spec(path: &Path, cfg: &Config) -> Result<Model, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let spec: GeometrySpec = serde_json::from_str(&text)?;
    from_spec(&spec, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screen::radical_endomorphism;

    fn cfg() -> Config {
        Config {
            samples: 5,
            ..Config::default()
        }
    }

    #[test]
    fn cone_is_the_pulled_back_cone() {
        let c = cone(3).unwrap();
        let r = cone_pullback_record(&c, &cfg());
        assert!(r.pass, "{}", r.text_line());
        let a = radical_endomorphism_record(&c.structure, &c.screen, 1.0, "az", &cfg());
        assert!(a.pass, "{}", a.text_line());
    }

    #[test]
    fn cone_frame_is_rescaled_coordinate_frame() {
        let c = cone(2).unwrap();
        let p = [0.3, -0.4, 1.1];
        let mut ev = c.structure.chart.evaluator(&p);
        let s = (-p[0]).exp() * (1.0 + p[1] * p[1] + p[2] * p[2]) / 2.0;
        for (i, e) in c.screen.frame.iter().enumerate() {
            let v = e.eval(&mut ev).unwrap();
            for (k, x) in v.iter().enumerate() {
                let want = if k == i + 1 { s } else { 0.0 };
                assert!((x - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn hyperplane_radical_endomorphism_vanishes() {
        let h = hyperplane(3).unwrap();
        let a = radical_endomorphism(&h.structure, &h.screen);
        assert!(a.iter().flatten().all(|x| x.is_zero()));
    }

    #[test]
    fn sasakian_axioms_hold() {
        let s = sasakian(1).unwrap();
        let data = s.sasakian.as_ref().unwrap();
        for r in sasakian_axioms(&s.structure, data, &cfg()) {
            assert!(r.pass, "{}", r.text_line());
        }
        let a = radical_endomorphism_record(&s.structure, &s.screen, 0.0, "az", &cfg());
        assert!(a.pass, "{}", a.text_line());
        let t = tanaka_record(&s, &cfg()).unwrap();
        assert!(t.pass, "{}", t.text_line());
    }

    #[test]
    fn sasakian_j_vanishes() {
        let s = sasakian(1).unwrap();
        let j = s.compatible.as_ref().unwrap().base().j_matrix(&s.structure);
        let eqs: Vec<_> = j.iter().flatten().map(|&x| (x, ScalarExpr::ZERO)).collect();
        let r = eq_check("j", "J = 0", &s.structure, &cfg(), 1e-10, &eqs);
        assert!(r.pass, "{}", r.text_line());
    }

    #[test]
    fn spec_round_trip() {
        for m in [cone(3).unwrap(), hyperplane(2).unwrap(), sasakian(1).unwrap()] {
            let spec = emit_spec(&m);
            let text = serde_json::to_string(&spec).unwrap();
            let back: GeometrySpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, spec);
            let model = from_spec(&back, &cfg()).unwrap();
            let st = &model.structure;
            let p = st.chart.center();
            let mut e1 = st.chart.evaluator(&p);
            let mut e2 = m.structure.chart.evaluator(&p);
            let h1 = st.h.eval(&mut e1).unwrap();
            let h2 = m.structure.h.eval(&mut e2).unwrap();
            assert!((h1 - h2).amax() < 1e-14);
            if let (Some(a), Some(b)) = (&model.compatible, &m.compatible) {
                for (ga, gb) in a.base().gamma.iter().zip(&b.base().gamma) {
                    for (x, y) in ga.iter().flatten().zip(gb.iter().flatten()) {
                        assert!((e1.eval(*x).unwrap() - e2.eval(*y).unwrap()).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn malformed_entry_is_named() {
        let mut spec = emit_spec(&cone(2).unwrap());
        spec.metric[1][1] = "exp(2*t) * (".into();
        match from_spec(&spec, &cfg()) {
            Err(ModelError::Parse { entry, .. }) => assert_eq!(entry, "metric[1][1]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unnormalized_tau_is_rejected() {
        let mut spec = emit_spec(&cone(2).unwrap());
        spec.tau0 = Some(vec!["2".into(), "0".into(), "0".into()]);
        let err = from_spec(&spec, &cfg()).unwrap_err();
        assert!(matches!(err, ModelError::Validation(_)), "{err}");
        assert!(!err.is_parse());
    }

    #[test]
    fn degenerate_rank_is_rejected() {
        let mut spec = emit_spec(&hyperplane(2).unwrap());
        spec.metric[2][2] = "0".into();
        assert!(matches!(from_spec(&spec, &cfg()), Err(ModelError::Validation(_))));
    }

    fn suite_failures(model: &Model, samples: usize) -> Vec<String> {
        let cfg = Config {
            samples,
            ..Config::default()
        };
        let recs = crate::tractor::laws::identity_suite(
            &model.structure,
            &model.tau0,
            model.compatible.as_ref(),
            &cfg,
        )
        .unwrap();
        recs.iter().filter(|r| r.failing()).map(|r| r.text_line()).collect()
    }

    #[test]
    fn sasakian_passes_identity_suite() {
        let f = suite_failures(&sasakian(1).unwrap(), 3);
        assert!(f.is_empty(), "{}", f.join("\n"));
    }

    #[test]
    fn cone_passes_screen_identities() {
        let f = suite_failures(&cone(2).unwrap(), 3);
        assert!(f.is_empty(), "{}", f.join("\n"));
    }

    #[test]
    fn default_screen_form_is_normalized() {
        let mut spec = emit_spec(&cone(2).unwrap());
        spec.tau0 = None;
        let m = from_spec(&spec, &cfg()).unwrap();
        let r = tau_normalization_record(&m.structure, &m.tau0, &cfg());
        assert!(r.pass);
    }
}
