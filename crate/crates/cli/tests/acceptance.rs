//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lightlike_cli::{build, cmd_normalize, read_spec, shipped_spec};
use lightlike_core::algebra::algebra_suite;
use lightlike_core::calculus::{arena_len, expr_by_id, fd_crosscheck, Chart};
use lightlike_core::models::{radical_endomorphism_record, tanaka_record, Model};
use lightlike_core::normalize::{normalize, scale_bundle_check};
use lightlike_core::report::{CheckRecord, Config, Status};
use lightlike_core::tractor::laws::identity_suite;
use lightlike_core::tractor::CompatibleStructure;

const FLATNESS_TOL: f64 = 1e-7;
const FLATNESS_TIME: Duration = Duration::from_secs(300);
const PERTURBATION: f64 = 1e-2;
const PERTURBED_MIN: f64 = 1e-4;
const LAW_TOL: f64 = 1e-8;
const COCYCLE_TOL: f64 = 1e-9;
const AZ_TOL: f64 = 1e-9;
const ALGEBRA_TOL: f64 = 1e-12;
const ALGEBRA_TIME: Duration = Duration::from_secs(10);
const FD_TOL: f64 = 1e-6;
const FD_STEP: f64 = 1e-4;
const FD_FRACTION: f64 = 0.01;
const FD_SEED: u64 = 0xacce;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn load(file: &str, cfg: &Config) -> Model {
    let spec = read_spec(&shipped_spec(file)).expect("shipped spec");
    build(&spec, cfg).expect("shipped spec builds")
}

fn normalized(model: &Model, cfg: &Config) -> CompatibleStructure {
    normalize(&model.structure, &model.screen, cfg)
        .expect("normalization runs")
        .structure
        .expect("normalization completes")
}

/// Judged records only; the worst residual relative to `bound` decides.
fn within(records: &[CheckRecord], bound: f64) -> (bool, f64, Vec<String>) {
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for r in records {
        if matches!(r.status, Status::Skipped | Status::Info) {
            continue;
        }
        worst = worst.max(r.max_residual);
        if r.max_residual.is_nan() || r.max_residual >= bound || r.samples == 0 {
            bad.push(format!("{}={:.2e}", r.name, r.max_residual));
        }
    }
    (bad.is_empty(), worst, bad)
}

fn find<'a>(records: &'a [CheckRecord], name: &str) -> &'a CheckRecord {
    records
        .iter()
        .find(|r| r.name == name)
        .unwrap_or_else(|| panic!("missing record {name}"))
}

fn c1(cfg: &Config) -> Outcome {
    let start = Instant::now();
    let report = cmd_normalize(&shipped_spec("cone3.json"), cfg).expect("normalize runs");
    let elapsed = start.elapsed();
    let Some(flat) = report.find("tractor-flatness") else {
        return outcome(false, "normalization did not reach the curvature stage");
    };
    let pass = report.all_pass()
        && flat.samples >= 20
        && flat.max_residual < FLATNESS_TOL
        && elapsed < FLATNESS_TIME;
    outcome(
        pass,
        format!(
            "cone m=3: max |R^T| = {:.3e} over {} samples (tol {FLATNESS_TOL:e}), all records pass = {}, {:.2?}",
            flat.max_residual,
            flat.samples,
            report.all_pass(),
            elapsed
        ),
    )
}

fn c2(cfg: &Config, cone: &Model, cs: &CompatibleStructure) -> Outcome {
    let st = &cone.structure;
    let good = scale_bundle_check(st, cs, cfg).expect("curvature");
    let bad = scale_bundle_check(st, &cs.perturbed(PERTURBATION, 11), cfg).expect("curvature");
    let pass = good.max_residual < FLATNESS_TOL && bad.max_residual > PERTURBED_MIN;
    outcome(
        pass,
        format!(
            "normalized {:.3e} (< {FLATNESS_TOL:e}), perturbed ε={PERTURBATION:e} {:.3e} (> {PERTURBED_MIN:e})",
            good.max_residual, bad.max_residual
        ),
    )
}

fn c3(cfg: &Config, models: &[&Model]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in models {
        let recs = identity_suite(&m.structure, &m.tau0, m.compatible.as_ref(), cfg).expect("suite");
        let conn = find(&recs, "change-law-connection");
        let morph = find(&recs, "change-law-morphism");
        let cocycle = find(&recs, "transition-cocycle");
        let ok = conn.status == Status::Pass
            && morph.status == Status::Pass
            && conn.samples >= 20
            && conn.max_residual < LAW_TOL
            && morph.max_residual < LAW_TOL
            && cocycle.max_residual < COCYCLE_TOL;
        pass &= ok;
        parts.push(format!(
            "{}: ∇ {:.2e}, D {:.2e}, cocycle {:.2e}",
            m.name, conn.max_residual, morph.max_residual, cocycle.max_residual
        ));
    }
    outcome(pass, parts.join("; "))
}

fn c4(cfg: &Config, models: &[(&Model, Option<&CompatibleStructure>)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, cs) in models {
        let mut recs = identity_suite(&m.structure, &m.tau0, *cs, cfg).expect("suite");
        recs.extend(tanaka_record(m, cfg));
        let (ok, worst, bad) = within(&recs, LAW_TOL);
        let judged = recs
            .iter()
            .filter(|r| !matches!(r.status, Status::Skipped | Status::Info))
            .count();
        pass &= ok && recs.iter().all(|r| r.status != Status::Skipped);
        parts.push(format!("{}: {judged} checks, worst {worst:.2e}", m.name));
        if !bad.is_empty() {
            parts.push(format!("failing {}", bad.join(", ")));
        }
    }
    outcome(pass, parts.join("; "))
}

fn c5(cfg: &Config, models: &[(&Model, f64, &CompatibleStructure)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, target, cs) in models {
        let az = radical_endomorphism_record(&m.structure, &m.screen, *target, "radical-endomorphism", cfg);
        let recs = identity_suite(&m.structure, &m.tau0, Some(cs), cfg).expect("suite");
        let j = find(&recs, "jsym-equals-radical-endomorphism");
        pass &= az.samples > 0 && az.max_residual < AZ_TOL && j.samples > 0 && j.max_residual < LAW_TOL;
        parts.push(format!(
            "{}: A_Z − {target}·Id {:.2e}, J_sym − A_Z {:.2e}",
            m.name, az.max_residual, j.max_residual
        ));
    }
    outcome(pass, parts.join("; "))
}

fn c6(cfg: &Config) -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [2, 3, 4] {
        let recs = algebra_suite(m, cfg).expect("algebra suite");
        let (ok, worst, bad) = within(&recs, ALGEBRA_TOL);
        pass &= ok;
        parts.push(format!("m={m}: {} checks, worst {worst:.2e}", recs.len()));
        if !bad.is_empty() {
            parts.push(format!("failing {}", bad.join(", ")));
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed < ALGEBRA_TIME;
    parts.push(format!("{elapsed:.2?}"));
    outcome(pass, parts.join("; "))
}

fn c7(cfg: &Config) -> Outcome {
    let hyper = load("hyperplane3.json", cfg);
    let out = normalize(&hyper.structure, &hyper.screen, cfg).expect("normalize runs");
    let gate = find(&out.records, "homothetic-radical");
    let gated = out.refused.as_deref() == Some("homothety")
        && gate.status == Status::Fail
        && gate.notes.iter().any(|n| n.contains("A_Z = Id"))
        && out.records.len() == 1;
    let cone2 = load("cone2.json", cfg);
    let out = normalize(&cone2.structure, &cone2.screen, cfg).expect("normalize runs");
    let stages_before = out
        .records
        .iter()
        .filter(|r| r.name != "schouten-stage")
        .all(|r| !r.failing());
    let schouten = out.refused.as_deref() == Some("schouten")
        && find(&out.records, "schouten-stage").status == Status::Fail
        && stages_before;
    outcome(
        gated && schouten,
        format!(
            "hyperplane refused at A_Z gate with note: {gated}; m=2 refused at Schouten stage after {} passing records: {schouten}",
            out.records.len() - 1
        ),
    )
}

/// Charts whose variables an arena node may use.
fn chart_for<'a>(charts: &'a [Chart], names: &[String]) -> Option<&'a Chart> {
    charts
        .iter()
        .find(|c| names.iter().all(|n| c.index_of(n).is_some()))
}

fn c8(range: std::ops::Range<usize>, charts: &[Chart], cfg: &Config) -> Outcome {
    let total = range.len();
    let count = ((total as f64) * FD_FRACTION).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(FD_SEED);
    let mut ids: Vec<usize> = sample(&mut rng, total, count.min(total))
        .into_iter()
        .map(|k| range.start + k)
        .collect();
    ids.sort_unstable();
    let (mut checked, mut foreign, mut domain) = (0usize, 0usize, 0usize);
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for id in ids {
        let e = expr_by_id(id).expect("id in arena");
        let names: Vec<String> = e.symbols().into_iter().map(|s| s.name()).collect();
        let Some(chart) = chart_for(charts, &names) else {
            foreign += 1;
            continue;
        };
        let point = chart
            .sample_points_seeded(1, cfg.seed.unwrap_or(chart.seed()) ^ id as u64)
            .remove(0);
        let a = rng.gen_range(0..chart.dim());
        match fd_crosscheck(chart, e, a, &point, FD_STEP) {
            Ok(r) => {
                checked += 1;
                worst = worst.max(r);
                if r.is_nan() || r >= FD_TOL {
                    bad.push(format!("#{id}/∂{}={r:.2e}", chart.names()[a]));
                }
            }
            Err(_) => domain += 1,
        }
    }
    let mut detail = format!(
        "{checked} of {total} nodes checked ({:.1}% sample), worst {worst:.2e}, {domain} outside domain, {foreign} not on a chart",
        FD_FRACTION * 100.0
    );
    if !bad.is_empty() {
        bad.truncate(10);
        detail.push_str(&format!("; failing {}", bad.join(", ")));
    }
    outcome(checked > 0 && bad.is_empty(), detail)
}

fn main() {
    let cfg = Config::default();
    let first_node = arena_len();

    let cone = load("cone3.json", &cfg);
    let hyper = load("hyperplane3.json", &cfg);
    let sas = load("sasakian1.json", &cfg);
    let hyper_cs = hyper.compatible.clone().expect("hyperplane carries a structure");
    let sas_cs = sas.compatible.clone().expect("sasakian carries a structure");

    let mut results = Vec::new();
    results.push(("C1 model flatness", c1(&cfg)));
    let cone_cs = normalized(&cone, &cfg);
    results.push(("C2 scale-bundle criterion", c2(&cfg, &cone, &cone_cs)));
    results.push(("C3 change-law closure", c3(&cfg, &[&hyper, &sas])));
    results.push((
        "C4 identity suite",
        c4(&cfg, &[(&cone, Some(&cone_cs)), (&hyper, Some(&hyper_cs)), (&sas, Some(&sas_cs))]),
    ));
    results.push((
        "C5 radical endomorphism",
        c5(&cfg, &[(&cone, 1.0, &cone_cs), (&hyper, 0.0, &hyper_cs), (&sas, 0.0, &sas_cs)]),
    ));
    let last_node = arena_len();
    results.push(("C6 algebra suite", c6(&cfg)));
    results.push(("C7 normalization gating", c7(&cfg)));
    let charts = [
        cone.structure.chart.clone(),
        hyper.structure.chart.clone(),
        sas.structure.chart.clone(),
    ];
    results.push(("C8 derivative integrity", c8(first_node..last_node, &charts, &cfg)));

    let mut failed = 0;
    for (name, o) in &results {
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
