//! Residual checks for the screen identities, transition maps, change laws,
//! Galilean extensions and the curvature of ξ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::curvature::{contract, curvature_on_section, TractorCurvature};
use super::{
    derive_from, phi, tractor_connection, tractor_metric, transition, CompatibleStructure, Matrix,
    ScreenConnection, TractorSection,
};
use crate::algebra::form_matrix;
use crate::calculus::{
    lie_bracket, Chart, DomainError, Evaluator, LightlikeStructure, OneForm, ScalarExpr,
    VectorField,
};
use crate::report::{sample_check, CheckRecord, Config};
use crate::screen::{
    frame_residual, k_field, l_field, make_screen, make_screen_with_order, project,
    radical_endomorphism, random_screen_form, ScreenError, ScreenForm,
};

/// Amplitude of the random screen-form perturbations used by the suite.
pub const SCREEN_AMPLITUDE: f64 = 0.3;

/// Named vector fields used as arguments V, W.
pub type Fields = Vec<(String, VectorField)>;

/// Coordinate fields, Z, the frame of `screen`, and `random` fields with
/// seeded low-degree polynomial coefficients.
pub fn test_fields(st: &LightlikeStructure, screen: &ScreenForm, random: usize, seed: u64) -> Fields {
    let n = st.n();
    let mut out: Fields = (0..n)
        .map(|a| (format!("d_{}", st.chart.names()[a]), VectorField::coordinate(n, a)))
        .collect();
    out.push(("Z".into(), st.z.clone()));
    for (i, e) in screen.frame.iter().enumerate() {
        out.push((format!("E{}", i + 1), e.clone()));
    }
    out.extend(random_fields(&st.chart, random, seed));
    out
}

pub fn random_fields(chart: &Chart, count: usize, seed: u64) -> Fields {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let comps = (0..chart.dim()).map(|_| random_poly(chart, &mut rng)).collect();
            (format!("V{}", k + 1), VectorField(comps))
        })
        .collect()
}

fn random_poly(chart: &Chart, rng: &mut impl Rng) -> ScalarExpr {
    let n = chart.dim();
    let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
    let c: [f64; 3] = [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-0.5..0.5),
    ];
    c[0] + c[1] * chart.coord(a) + c[2] * chart.coord(a) * chart.coord(b)
}

fn random_smooth(chart: &Chart, rng: &mut impl Rng) -> ScalarExpr {
    let b = rng.gen_range(0..chart.dim());
    random_poly(chart, rng) + rng.gen_range(-0.5..0.5) * chart.coord(b).sin()
}

/// Expression-valued sections with smooth seeded components.
pub fn random_sections(chart: &Chart, screen: &ScreenForm, count: usize, seed: u64) -> Vec<TractorSection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let alpha = random_smooth(chart, &mut rng);
            let x = (0..screen.m()).map(|_| random_smooth(chart, &mut rng)).collect();
            let beta = random_smooth(chart, &mut rng);
            TractorSection::new(screen, alpha, x, beta)
        })
        .collect()
}

/// Max |lhs − rhs| over all pairs at every sample.
pub fn eq_check(
    name: &str,
    anchor: &str,
    st: &LightlikeStructure,
    cfg: &Config,
    tol: f64,
    eqs: &[(ScalarExpr, ScalarExpr)],
) -> CheckRecord {
    sample_check(name, anchor, &st.chart, cfg, tol, |ev, _| residual(ev, eqs))
}

pub fn residual(ev: &mut Evaluator, eqs: &[(ScalarExpr, ScalarExpr)]) -> Result<f64, DomainError> {
    let mut worst: f64 = 0.0;
    for &(a, b) in eqs {
        let r = (ev.eval(a)? - ev.eval(b)?).abs();
        if r.is_nan() {
            return Ok(f64::NAN);
        }
        worst = worst.max(r);
    }
    Ok(worst)
}

fn vec_eqs(a: &VectorField, b: &VectorField) -> Vec<(ScalarExpr, ScalarExpr)> {
    a.0.iter().copied().zip(b.0.iter().copied()).collect()
}

fn zero_eqs(a: &[ScalarExpr]) -> Vec<(ScalarExpr, ScalarExpr)> {
    a.iter().map(|&x| (x, ScalarExpr::ZERO)).collect()
}

fn section_eqs(a: &TractorSection, b: &TractorSection) -> Vec<(ScalarExpr, ScalarExpr)> {
    a.flat().into_iter().zip(b.flat()).collect()
}

/// The screens used by the suite: the base screen α and three seeded
/// perturbations τ, τ̄, τ̂ of it.
pub struct Screens {
    pub alpha: ScreenForm,
    pub tau: ScreenForm,
    pub bar: ScreenForm,
    pub hat: ScreenForm,
}

impl Screens {
    pub fn build(st: &LightlikeStructure, base: &OneForm, seed: u64) -> Result<Self, ScreenError> {
        let mk = |k: u64| {
            let f = random_screen_form(st, base, seed.wrapping_add(k), SCREEN_AMPLITUDE);
            make_screen(st, &f)
        };
        Ok(Screens {
            alpha: make_screen(st, base)?,
            tau: mk(1)?,
            bar: mk(2)?,
            hat: mk(3)?,
        })
    }
}

fn suite_seed(st: &LightlikeStructure, cfg: &Config) -> u64 {
    cfg.seed.unwrap_or(st.chart.seed())
}

/// Identities that involve only (h, Z) and screen forms.
pub fn screen_identities(st: &LightlikeStructure, sc: &Screens, cfg: &Config) -> Result<Vec<CheckRecord>, ScreenError> {
    let seed = suite_seed(st, cfg);
    let fields = test_fields(st, &sc.tau, 2, seed);
    let (a, t, b) = (&sc.alpha, &sc.tau, &sc.bar);
    let tol = cfg.strict_tol;
    let mut out = Vec::new();

    let mut worst: f64 = 0.0;
    for s in [a, t, b, &sc.hat] {
        worst = worst.max(frame_residual(st, s)?);
    }
    out.push(
        CheckRecord::new("frame-orthonormality", "τ(E_i) = 0 and h(E_i,E_j) = δ_ij", tol)
            .with_result(cfg.samples.max(1), worst),
    );

    let l = l_field(t, b);
    let k = k_field(st, t, b);
    let l2 = st.h.apply(&l, &l);

    let eqs: Vec<_> = fields
        .iter()
        .map(|(_, w)| (st.h.apply(w, &k), t.tau.apply(w) - b.tau.apply(w)))
        .collect();
    out.push(eq_check("k-field-pairing", "h(W, K) = τ(W) − τ̄(W)", st, cfg, tol, &eqs));

    let eta_t = transition(st, t, b, &TractorSection::eta(t)).expect("same splitting");
    let pairing = tractor_metric(&eta_t, &TractorSection::eta(b)).expect("same splitting");
    let eqs = vec![
        (-t.tau.apply(&k), b.tau.apply(&k)),
        (pairing, b.tau.apply(&k)),
    ];
    out.push(eq_check("k-field-screen-values", "𝐡(η^τ, η^τ̄) = −τ(K) = τ̄(K)", st, cfg, tol, &eqs));

    let eqs = vec_eqs(&project(st, &b.tau, &k), &l);
    out.push(eq_check("k-field-projection", "P^τ̄(K) = L with K = L − ½h(L,L)Z", st, cfg, tol, &eqs));

    let lhs = l.add(&l_field(b, t));
    let eqs = vec_eqs(&lhs, &st.z.scale(l2));
    out.push(eq_check("l-field-swap", "L_{τ,τ̄} + L_{τ̄,τ} = h(L,L)Z", st, cfg, tol, &eqs));

    let lat = l_field(a, t);
    let lab = l_field(a, b);
    let lhs = lat.add(&l);
    let rhs = lab.sub(&st.z.scale(st.h.apply(&lat, &l)));
    out.push(eq_check(
        "l-field-composition",
        "L_{α,τ} + L_{τ,τ̄} = L_{α,τ̄} − h(L_{α,τ}, L_{τ,τ̄})Z",
        st,
        cfg,
        tol,
        &vec_eqs(&lhs, &rhs),
    ));

    let eqs = vec![(l2, st.h.apply(&k, &k)), (l2, -2.0 * b.tau.apply(&k))];
    out.push(eq_check("l-k-norms", "h(L,L) = h(K,K) = −2τ̄(K)", st, cfg, tol, &eqs));

    let order: Vec<usize> = (0..st.n()).rev().collect();
    let b_rev = make_screen_with_order(st, &b.tau, &order)?;
    let eqs = vec_eqs(&l_field(t, &b_rev), &l);
    out.push(eq_check("l-field-frame-independence", "L does not depend on the frame", st, cfg, tol, &eqs));

    let mt = radical_endomorphism(st, t);
    let mb = radical_endomorphism(st, b);
    let m = st.m();
    let eqs: Vec<_> = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| (mt[i][j], mt[j][i]))
        .collect();
    out.push(eq_check("radical-endomorphism-symmetric", "A_Z is self-adjoint", st, cfg, tol, &eqs));
    out.push(sample_check(
        "radical-endomorphism-screen-independence",
        "spectrum of A_Z does not depend on τ",
        &st.chart,
        cfg,
        cfg.eig_tol,
        |ev, _| {
            let et = spectrum(ev, &mt)?;
            let eb = spectrum(ev, &mb)?;
            Ok(et.iter().zip(&eb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
        },
    ));
    Ok(out)
}

/// Sorted eigenvalues of a symmetric expression matrix at a point.
pub fn spectrum(ev: &mut Evaluator, m: &Matrix) -> Result<Vec<f64>, DomainError> {
    let k = m.len();
    let mut a = nalgebra::DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            a[(i, j)] = ev.eval(m[i][j])?;
        }
    }
    let sym = 0.5 * (&a + a.transpose());
    let mut e: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    Ok(e)
}

/// Transition maps and Φ.
pub fn transition_laws(st: &LightlikeStructure, sc: &Screens, cfg: &Config) -> Vec<CheckRecord> {
    let seed = suite_seed(st, cfg);
    let (t, b, hat) = (&sc.tau, &sc.bar, &sc.hat);
    let tol = cfg.strict_tol;
    let secs = random_sections(&st.chart, t, 3, seed ^ 0x5eed);
    let mut out = Vec::new();

    let mut eqs = Vec::new();
    for s in &secs {
        eqs.extend(section_eqs(&transition(st, t, t, s).expect("splitting"), s));
    }
    let xi = transition(st, t, b, &TractorSection::xi(t)).expect("splitting");
    eqs.extend(section_eqs(&xi, &TractorSection::xi(b)));
    out.push(eq_check("transition-trivial-cases", "F_{τ,τ} = Id and F_{τ,τ̄}(ξ) = ξ", st, cfg, tol, &eqs));

    let mapped: Vec<_> = secs
        .iter()
        .map(|s| transition(st, t, b, s).expect("splitting"))
        .collect();
    let mut eqs = Vec::new();
    for i in 0..secs.len() {
        for j in i..secs.len() {
            eqs.push((
                tractor_metric(&mapped[i], &mapped[j]).expect("splitting"),
                tractor_metric(&secs[i], &secs[j]).expect("splitting"),
            ));
        }
    }
    out.push(eq_check("transition-isometry", "𝐡(F s₁, F s₂) = 𝐡(s₁, s₂)", st, cfg, tol, &eqs));

    let mut eqs = Vec::new();
    for (s, fs) in secs.iter().zip(&mapped) {
        let two = transition(st, b, hat, fs).expect("splitting");
        let one = transition(st, t, hat, s).expect("splitting");
        eqs.extend(section_eqs(&two, &one));
    }
    out.push(eq_check("transition-cocycle", "F_{τ̄,τ̂} ∘ F_{τ,τ̄} = F_{τ,τ̂}", st, cfg, tol, &eqs));

    let fields = test_fields(st, t, 2, seed);
    let mut eqs = Vec::new();
    for (i, (_, v)) in fields.iter().enumerate() {
        for (_, w) in &fields[i..] {
            let pv = phi(st, t, v);
            let pw = phi(st, t, w);
            eqs.push((tractor_metric(&pv, &pw).expect("splitting"), st.h.apply(v, w)));
        }
    }
    out.push(eq_check("phi-isometry", "𝐡(Φ(V), Φ(W)) = h(V, W)", st, cfg, tol, &eqs));

    let mut eqs = section_eqs(&phi(st, t, &st.z), &TractorSection::xi(t));
    for (_, w) in &fields {
        let p = phi(st, t, w);
        let back = st.z.scale(p.alpha).add(&t.vector(&p.x));
        eqs.extend(vec_eqs(&back, w));
    }
    out.push(eq_check("phi-radical-and-injective", "Φ(Z) = ξ and Φ(W) determines W", st, cfg, tol, &eqs));
    out
}

/// Change laws, connection and Galilean identities, and curvature of ξ
/// for a lightlike-compatible structure.
pub fn structure_laws(
    st: &LightlikeStructure,
    cs: &CompatibleStructure,
    sc: &Screens,
    cfg: &Config,
) -> Vec<CheckRecord> {
    let seed = suite_seed(st, cfg);
    let (t, b) = (&sc.tau, &sc.bar);
    let law = cfg.law_tol;
    let m = st.m();
    let mut out = Vec::new();

    let base = cs.base();
    let again = cs.derive(st, cs.screen());
    let mut eqs = Vec::new();
    for a in 0..st.n() {
        for i in 0..m {
            eqs.push((again.d[a][i], base.d[a][i]));
            for j in 0..m {
                eqs.push((again.gamma[a][i][j], base.gamma[a][i][j]));
            }
        }
    }
    out.push(eq_check("derive-at-base", "derivation to τ₀ itself is the identity", st, cfg, cfg.strict_tol, &eqs));

    let ct = cs.derive(st, t);
    let cb = cs.derive(st, b);
    let via = derive_from(st, &ct, b);
    let (mut eg, mut ed) = (Vec::new(), Vec::new());
    for a in 0..st.n() {
        for i in 0..m {
            ed.push((via.d[a][i], cb.d[a][i]));
            for j in 0..m {
                eg.push((via.gamma[a][i][j], cb.gamma[a][i][j]));
            }
        }
    }
    out.push(eq_check(
        "change-law-connection",
        "∇^τ̄_W(P^τ̄ X) = P^τ̄(∇^τ_W X − τ̄(X)W) − h(X,W)L_{τ,τ̄}",
        st,
        cfg,
        law,
        &eg,
    ));
    out.push(eq_check(
        "change-law-morphism",
        "D^τ̄(W) = P^τ̄(D^τ W + ½h(L,L)W) − τ(W)L − ∇^τ̄_W L",
        st,
        cfg,
        law,
        &ed,
    ));

    out.extend(connection_laws(st, &ct, &cb, cfg, seed));
    out.extend(galilean_laws(st, cs.base(), cfg, seed, "base"));
    out.extend(galilean_laws(st, &ct, cfg, seed, "perturbed"));
    out.extend(curvature_laws(st, &ct, &cb, cfg, seed));
    out
}

fn connection_laws(
    st: &LightlikeStructure,
    ct: &ScreenConnection,
    cb: &ScreenConnection,
    cfg: &Config,
    seed: u64,
) -> Vec<CheckRecord> {
    let law = cfg.law_tol;
    let (t, b) = (&ct.screen, &cb.screen);
    let fields = test_fields(st, t, 2, seed);
    let secs = random_sections(&st.chart, t, 2, seed ^ 0xc0);
    let mut out = Vec::new();

    let mut eqs = Vec::new();
    for (_, w) in &fields {
        let d1 = tractor_connection(st, ct, w, &secs[0]).expect("splitting");
        let d2 = tractor_connection(st, ct, w, &secs[1]).expect("splitting");
        let lhs = st.chart.directional(w, tractor_metric(&secs[0], &secs[1]).expect("splitting"));
        let rhs = tractor_metric(&d1, &secs[1]).expect("splitting")
            + tractor_metric(&secs[0], &d2).expect("splitting");
        eqs.push((lhs, rhs));
    }
    out.push(eq_check("connection-metric-compatibility", "∇^T is 𝐡-metric", st, cfg, law, &eqs));

    let mut eqs = Vec::new();
    for (_, w) in &fields {
        let dx = tractor_connection(st, ct, w, &TractorSection::xi(t)).expect("splitting");
        eqs.extend(section_eqs(&dx, &phi(st, t, w)));
        let de = tractor_connection(st, ct, w, &TractorSection::eta(t)).expect("splitting");
        let want = TractorSection::new(t, ScalarExpr::ZERO, ct.d_along(w), -t.tau.apply(w));
        eqs.extend(section_eqs(&de, &want));
    }
    out.push(eq_check(
        "connection-on-xi-and-eta",
        "∇_W ξ = (τW, P W, 0) and ∇_W η = (0, D W, −τW)",
        st,
        cfg,
        law,
        &eqs,
    ));

    let mut eqs = Vec::new();
    for (_, w) in fields.iter().take(st.n() + 1) {
        for s in &secs {
            let lhs = transition(st, t, b, &tractor_connection(st, ct, w, s).expect("splitting"))
                .expect("splitting");
            let rhs = tractor_connection(st, cb, w, &transition(st, t, b, s).expect("splitting"))
                .expect("splitting");
            eqs.extend(section_eqs(&lhs, &rhs));
        }
    }
    out.push(eq_check("connection-naturality", "F ∘ ∇^{T,τ} = ∇^{T,τ̄} ∘ F", st, cfg, law, &eqs));

    let l = l_field(t, b);
    let l2 = st.h.apply(&l, &l);
    let pl = ct.screen.components(st, &l);
    let mut ea = Vec::new();
    let mut eb = Vec::new();
    let mut e1 = Vec::new();
    let mut e2 = Vec::new();
    for (_, w) in &fields {
        let dbar = cb.d_vector(w);
        let dt = ct.d_vector(w);
        let cov_l = t.vector(&ct.cov_components(st, w, &pl));
        for (_, x) in &fields {
            let x = &project(st, &t.tau, x);
            let lhs = st.h.apply(x, &dbar);
            let rhs = st.h.apply(x, &dt) + b.tau.apply(x) * b.tau.apply(w)
                - 0.5 * l2 * st.h.apply(x, w)
                - st.h.apply(x, &cov_l);
            ea.push((lhs, rhs));
        }
        let lhs = t.tau.apply(&dbar) + b.tau.apply(&dt);
        let rhs = -0.5 * st.chart.directional(w, l2) - 0.5 * (t.tau.apply(w) + b.tau.apply(w)) * l2;
        eb.push((lhs, rhs));

        let rhs2 = project(st, &b.tau, &dt.add(&w.scale(0.5 * l2)))
            .sub(&l.scale(t.tau.apply(w)))
            .sub(&cb.galilean(st, w, &l));
        e2.extend(vec_eqs(&dbar, &rhs2));

        for (_, v) in fields.iter().take(st.n() + 1) {
            let lhs = cb.galilean(st, v, w);
            let rhs = project(st, &b.tau, &ct.galilean(st, v, w))
                .add(&st.z.scale(st.chart.directional(v, b.tau.apply(w))))
                .sub(&l.scale(st.h.apply(v, w)));
            e1.extend(vec_eqs(&lhs, &rhs));
        }
    }
    out.push(eq_check(
        "morphism-pairing-consistency",
        "h(X, D^τ̄W) = h(X, D^τW) + τ̄(X)τ̄(W) − ½h(L,L)h(X,W) − h(X, ∇^τ_W(P^τ L)), X ∈ An(τ)",
        st,
        cfg,
        law,
        &ea,
    ));
    out.push(eq_check(
        "morphism-trace-consistency",
        "τ(D^τ̄W) + τ̄(D^τW) = −½W(h(L,L)) − ½(τ(W) + τ̄(W))h(L,L)",
        st,
        cfg,
        law,
        &eb,
    ));
    out.push(eq_check(
        "galilean-change-law",
        "∇̃^τ̄_V W = P^τ̄(∇̃^τ_V W) + V(τ̄W)Z − h(V,W)L_{τ,τ̄}",
        st,
        cfg,
        law,
        &e1,
    ));
    out.push(eq_check(
        "galilean-morphism-change-law",
        "D^τ̄(W) = P^τ̄(D^τW + ½h(L,L)W) − τ(W)L − ∇̃^τ̄_W L",
        st,
        cfg,
        law,
        &e2,
    ));
    out
}

/// Galilean connection axioms for the extension of ∇^τ.
pub fn galilean_laws(
    st: &LightlikeStructure,
    c: &ScreenConnection,
    cfg: &Config,
    seed: u64,
    label: &str,
) -> Vec<CheckRecord> {
    let law = cfg.law_tol;
    let s = &c.screen;
    let fields = test_fields(st, s, 2, seed);
    let frame: Vec<&VectorField> = s.frame.iter().collect();
    let (mut clock, mut tor, mut metric, mut vort, mut proj) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, (_, v)) in fields.iter().enumerate() {
        for (_, w) in &fields {
            let g = c.galilean(st, v, w);
            clock.push((st.chart.directional(v, s.tau.apply(w)), s.tau.apply(&g)));
        }
        for (_, w) in &fields[i + 1..] {
            let t = c.galilean_torsion(st, v, w);
            tor.push((s.tau.apply(&t), c.dtau(st, v, w)));
            let lhs = project(st, &s.tau, &t);
            let rhs = c
                .cov(st, v, w)
                .sub(&c.cov(st, w, v))
                .sub(&project(st, &s.tau, &lie_bracket(&st.chart, v, w)))
                .sub(&c.b_form(v, w));
            proj.extend(vec_eqs(&lhs, &rhs));
        }
        for x in &frame {
            for y in &frame {
                let lhs = st.chart.directional(v, st.h.apply(x, y));
                let rhs = st.h.apply(&c.galilean(st, v, x), y) + st.h.apply(x, &c.galilean(st, v, y));
                metric.push((lhs, rhs));
            }
        }
    }
    for x in &frame {
        for y in &frame {
            let lhs = st.h.apply(&c.galilean(st, x, &st.z), y);
            let rhs = st.h.apply(x, &c.galilean(st, y, &st.z));
            vort.push((lhs, rhs));
        }
    }
    let grav = zero_eqs(&c.galilean(st, &st.z, &st.z).0);
    let name = |s: &str| format!("{s}[{label}]");
    vec![
        eq_check(&name("galilean-clock-parallel"), "∇̃τ = 0", st, cfg, law, &clock),
        eq_check(&name("galilean-metric"), "∇̃h = 0 on An(τ)", st, cfg, law, &metric),
        eq_check(&name("galilean-torsion-clock"), "τ ∘ T̃or = dτ", st, cfg, law, &tor),
        eq_check(&name("galilean-gravitational-field"), "∇̃_Z Z = 0", st, cfg, law, &grav),
        eq_check(&name("galilean-vorticity"), "h(∇̃_X Z, Y) = h(X, ∇̃_Y Z)", st, cfg, law, &vort),
        eq_check(
            &name("galilean-projected-torsion"),
            "P ∘ T̃or = ∇_V(PW) − ∇_W(PV) − P[V,W] − B(V,W)",
            st,
            cfg,
            law,
            &proj,
        ),
    ]
}

fn curvature_laws(
    st: &LightlikeStructure,
    ct: &ScreenConnection,
    cb: &ScreenConnection,
    cfg: &Config,
    seed: u64,
) -> Vec<CheckRecord> {
    let law = cfg.law_tol;
    let t = &ct.screen;
    let m = st.m();
    let n = st.n();
    let fields = test_fields(st, t, 2, seed);
    let mut out = Vec::new();
    let curv = match TractorCurvature::compute(st, ct, cfg.node_budget, cfg.fd_fallback) {
        Ok(c) => c,
        Err(e) => {
            out.push(CheckRecord::failed("tractor-curvature", "R = dA + A∧A", e.to_string()));
            return out;
        }
    };
    let tol_c = if curv.fallback { cfg.fd_tol } else { law };

    // Expected R(V,W)ξ from the Galilean torsion, per pair.
    let mut expected: Vec<(Vec<f64>, Vec<f64>, Vec<ScalarExpr>)> = Vec::new();
    let pairs: Vec<(usize, usize)> = (0..fields.len())
        .flat_map(|i| ((i + 1)..fields.len()).map(move |j| (i, j)))
        .collect();
    let mut exprs = Vec::new();
    for &(i, j) in &pairs {
        let (v, w) = (&fields[i].1, &fields[j].1);
        let tor = ct.galilean_torsion(st, v, w);
        let mut e = vec![t.tau.apply(&tor) + ct.theta(st, v, w)];
        e.extend(t.components(st, &tor));
        e.push(ScalarExpr::ZERO);
        exprs.push(e);
    }
    let _ = &mut expected;
    let mut third_worst = Vec::new();
    out.push(sample_check(
        "curvature-of-xi",
        "R^T(V,W)ξ = (τ(T̃or) + θ, P(T̃or), 0)",
        &st.chart,
        cfg,
        tol_c,
        |ev, p| {
            let r = curv.eval_at(&st.chart, p, cfg.fd_step)?;
            let mut worst: f64 = 0.0;
            let mut third: f64 = 0.0;
            for (k, &(i, j)) in pairs.iter().enumerate() {
                let v = fields[i].1.eval(ev)?;
                let w = fields[j].1.eval(ev)?;
                let rv = contract(&r, &v, &w);
                for (row, &e) in exprs[k].iter().enumerate() {
                    worst = worst.max((rv[(row, 0)] - ev.eval(e)?).abs());
                }
                third = third.max(rv[(m + 1, 0)].abs());
            }
            third_worst.push(third);
            Ok(worst)
        },
    ));
    let third = third_worst.iter().copied().fold(0.0, f64::max);
    out.push(
        CheckRecord::new("curvature-of-xi-third-slot", "third slot of R^T(V,W)ξ vanishes", cfg.strict_tol.max(if curv.fallback { cfg.fd_tol } else { 0.0 }))
            .with_result(third_worst.len(), third),
    );

    let s = form_matrix(m);
    out.push(sample_check(
        "curvature-skew-adjoint",
        "𝐡(R s₁, s₂) + 𝐡(s₁, R s₂) = 0",
        &st.chart,
        cfg,
        tol_c,
        |_, p| {
            let r = curv.eval_at(&st.chart, p, cfg.fd_step)?;
            let mut worst: f64 = 0.0;
            for a in 0..n {
                for b in (a + 1)..n {
                    let x = r[a][b].transpose() * &s + &s * &r[a][b];
                    worst = worst.max(x.amax());
                }
            }
            Ok(worst)
        },
    ));

    // Definitional route on a few (V, W, s) against the matrix route.
    let secs = {
        let mut v = vec![TractorSection::xi(t), TractorSection::eta(t)];
        v.extend(random_sections(&st.chart, t, 1, seed ^ 0xd0));
        v
    };
    let vw: Vec<(VectorField, VectorField)> = {
        let rf = random_fields(&st.chart, 2, seed ^ 0xd1);
        vec![
            (VectorField::coordinate(n, 0), VectorField::coordinate(n, 1)),
            (st.z.clone(), t.frame[0].clone()),
            (rf[0].1.clone(), rf[1].1.clone()),
        ]
    };
    let mut defs = Vec::new();
    for (v, w) in &vw {
        for s in &secs {
            let r = curvature_on_section(st, ct, v, w, s).expect("splitting");
            defs.push((v.clone(), w.clone(), s.flat(), r.flat()));
        }
    }
    out.push(sample_check(
        "curvature-routes-agree",
        "∇_V∇_W − ∇_W∇_V − ∇_[V,W] equals the matrix curvature",
        &st.chart,
        cfg,
        tol_c,
        |ev, p| {
            let r = curv.eval_at(&st.chart, p, cfg.fd_step)?;
            let mut worst: f64 = 0.0;
            for (v, w, s, rs) in &defs {
                let rv = contract(&r, &v.eval(ev)?, &w.eval(ev)?);
                let sv = nalgebra::DVector::from_vec(s.iter().map(|&x| ev.eval(x)).collect::<Result<Vec<_>, _>>()?);
                let got = rv * sv;
                for (k, &e) in rs.iter().enumerate() {
                    worst = worst.max((got[k] - ev.eval(e)?).abs());
                }
            }
            Ok(worst)
        },
    ));

    let mut eqs = Vec::new();
    for &(i, j) in pairs.iter().take(12) {
        let (v, w) = (&fields[i].1, &fields[j].1);
        eqs.extend(vec_eqs(&ct.t_omega(st, v, w), &cb.t_omega(st, v, w)));
    }
    out.push(eq_check("t-omega-screen-independence", "𝐓(V,W) does not depend on τ", st, cfg, law, &eqs));

    // J_sym = A_Z, and J transforms by the frame change between screens.
    let jt = ct.j_matrix(st);
    let jb = cb.j_matrix(st);
    let az = radical_endomorphism(st, t);
    let mut eqs = Vec::new();
    for i in 0..m {
        for j in 0..m {
            eqs.push((0.5 * (jt[i][j] + jt[j][i]), az[i][j]));
        }
    }
    out.push(eq_check("jsym-equals-radical-endomorphism", "J_sym = A_Z", st, cfg, law, &eqs));
    let o: Matrix = (0..m)
        .map(|i| (0..m).map(|k| st.h.apply(&cb.screen.frame[i], &t.frame[k])).collect())
        .collect();
    let mut eqs = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let mut terms = Vec::new();
            for k in 0..m {
                for l in 0..m {
                    terms.push(o[i][k] * jt[k][l] * o[j][l]);
                }
            }
            eqs.push((jb[i][j], terms.into_iter().sum()));
        }
    }
    out.push(eq_check("j-screen-independence", "J does not depend on τ", st, cfg, law, &eqs));
    out
}

/// The full identity suite. Structure-dependent checks are skipped when no
/// structure is given.
pub fn identity_suite(
    st: &LightlikeStructure,
    base: &OneForm,
    cs: Option<&CompatibleStructure>,
    cfg: &Config,
) -> Result<Vec<CheckRecord>, ScreenError> {
    let seed = suite_seed(st, cfg);
    let screens = Screens::build(st, base, seed)?;
    let mut out = screen_identities(st, &screens, cfg)?;
    out.extend(transition_laws(st, &screens, cfg));
    match cs {
        Some(cs) => out.extend(structure_laws(st, cs, &screens, cfg)),
        None => {
            for name in [
                "change-law-connection",
                "change-law-morphism",
                "connection-metric-compatibility",
                "galilean-identities",
                "curvature-of-xi",
                "jsym-equals-radical-endomorphism",
            ] {
                out.push(CheckRecord::skipped(name, "requires (∇, D)", "no structure"));
            }
        }
    }
    Ok(out)
}
