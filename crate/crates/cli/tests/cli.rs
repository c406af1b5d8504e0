use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../specs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lightlike"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_spec(cmd: &str, name: &str, extra: &[&str]) -> Output {
    let p = spec(name);
    let mut args = vec![cmd, p.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

fn record<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["records"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["name"] == name)
        .unwrap_or_else(|| panic!("no record {name}"))
}

fn statuses(report: &Value) -> Vec<(String, String)> {
    report["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            (
                r["name"].as_str().unwrap().to_string(),
                r["status"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

#[test]
fn validate_reports_radical_endomorphism() {
    let out = run_spec("validate", "cone3.json", &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let az = record(&r, "radical-endomorphism");
    assert_eq!(az["notes"][0], "A_Z = Id (Z is homothetic)");

    let out = run_spec("validate", "hyperplane3.json", &[]);
    assert_eq!(out.status.code(), Some(0));
    let az = record(&json(&out), "radical-endomorphism").clone();
    assert_eq!(az["notes"][0], "A_Z = 0 (Z is Killing)");
}

#[test]
fn missing_file_exits_1() {
    let out = run(&["validate", "/nonexistent/spec.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}

#[test]
fn malformed_inputs_exit_1_and_name_the_entry() {
    let dir = tempfile::tempdir().unwrap();
    let bad_json = dir.path().join("bad.json");
    std::fs::write(&bad_json, "{ not json").unwrap();
    assert_eq!(run(&["validate", bad_json.to_str().unwrap()]).status.code(), Some(1));

    let text = std::fs::read_to_string(spec("hyperplane3.json")).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["metric"][1][1] = "1 + * r0".into();
    let p = dir.path().join("entry.json");
    std::fs::write(&p, v.to_string()).unwrap();
    let out = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("metric[1][1]"));
}

#[test]
fn invalid_structure_exits_2_with_records() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(spec("hyperplane3.json")).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    // h(Z, Z) ≠ 0: Z is no longer radical
    v["metric"][0][0] = "1".into();
    let p = dir.path().join("nondegenerate.json");
    std::fs::write(&p, v.to_string()).unwrap();
    let out = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(record(&json(&out), "radical")["status"], "fail");
}

#[test]
fn laws_pass_on_hyperplane_and_sasakian() {
    let out = run_spec("laws", "hyperplane3.json", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let out = run_spec("laws", "sasakian1.json", &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(record(&r, "galilean-tanaka-relation")["status"], "pass");
    assert_eq!(record(&r, "change-law-connection")["status"], "pass");
}

#[test]
fn laws_without_structure_skip_change_laws() {
    let out = run_spec("laws", "cone3.json", &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let c = record(&r, "change-law-connection");
    assert_eq!(c["status"], "skipped");
    assert_eq!(c["notes"][0], "no structure");
    assert_eq!(record(&r, "transition-cocycle")["status"], "pass");
}

#[test]
fn normalize_cone_passes_with_result() {
    let out = run_spec("normalize", "cone3.json", &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let flat = record(&r, "tractor-flatness");
    assert!(flat["max_residual"].as_f64().unwrap() < 1e-7);
    assert_eq!(r["result"]["m"], 3);
    assert_eq!(r["result"]["gamma"].as_array().unwrap().len(), 4);
}

#[test]
fn normalize_refusals() {
    let out = run_spec("normalize", "hyperplane3.json", &[]);
    assert_eq!(out.status.code(), Some(2));
    let r = json(&out);
    let gate = record(&r, "homothetic-radical");
    assert_eq!(gate["status"], "fail");
    assert!(gate["notes"][0].as_str().unwrap().contains("A_Z = Id"));
    assert_eq!(r["result"]["refused"], "homothety");

    let out = run_spec("normalize", "cone2.json", &[]);
    assert_eq!(out.status.code(), Some(2));
    let r = json(&out);
    assert_eq!(record(&r, "dz-solvability")["status"], "pass");
    assert_eq!(record(&r, "schouten-stage")["status"], "fail");
    assert_eq!(r["result"]["refused"], "schouten");
}

#[test]
fn curvature_scale_bundle_and_perturbation() {
    let out = run_spec("curvature", "cone3.json", &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["result"]["structure"], "normalization");
    assert_eq!(record(&r, "scale-bundle")["status"], "pass");

    let out = run_spec("curvature", "cone3.json", &["--perturb", "1e-2"]);
    assert_eq!(out.status.code(), Some(2));
    let sb = record(&json(&out), "scale-bundle").clone();
    assert!(sb["max_residual"].as_f64().unwrap() > 1e-4);
}

#[test]
fn curvature_tabulates_xi_on_hyperplane() {
    let out = run_spec("curvature", "hyperplane3.json", &["--random-fields", "1"]);
    let r = json(&out);
    let rows = r["result"]["xi_curvature"].as_array().unwrap();
    // coordinate fields, Z, 3 frame fields and one random field
    assert_eq!(rows.len(), 9 * 8 / 2);
    let row = rows
        .iter()
        .find(|x| x["v"] == "d_r0" && x["w"] == "d_r1")
        .unwrap();
    // R(∂_0, ∂_1)ξ = Φ(𝐓^ω(∂_0, ∂_1)) = −Φ(∂_1)
    assert_eq!(row["x"][0].as_f64().unwrap(), -1.0);
    assert_eq!(row["t_omega"][1].as_f64().unwrap(), -1.0);
}

#[test]
fn reports_are_deterministic() {
    let a = run_spec("laws", "sasakian1.json", &["--seed", "7"]);
    let b = run_spec("laws", "sasakian1.json", &["--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
    let c = run_spec("laws", "sasakian1.json", &["--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
    let a = run_spec("normalize", "cone3.json", &[]);
    let b = run_spec("normalize", "cone3.json", &[]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn text_and_json_carry_the_same_records() {
    let j = json(&run_spec("laws", "hyperplane3.json", &[]));
    let t = run_spec("laws", "hyperplane3.json", &["--format", "text"]);
    let text = String::from_utf8(t.stdout).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with('[')).collect();
    let recs = statuses(&j);
    assert_eq!(lines.len(), recs.len());
    for (line, (name, status)) in lines.iter().zip(&recs) {
        let tag = match status.as_str() {
            "pass" => "[PASS]",
            "fail" => "[FAIL]",
            "skipped" => "[SKIP]",
            _ => "[INFO]",
        };
        assert!(line.starts_with(&format!("{tag} {name} (")), "{line}");
    }
}

#[test]
fn flags_reach_the_report_header() {
    let out = run_spec(
        "validate",
        "cone3.json",
        &["--samples", "7", "--tol", "1e-6", "--fd-fallback", "off", "--node-budget", "1000"],
    );
    let r = json(&out);
    assert_eq!(r["config"]["samples"], 7);
    assert_eq!(r["config"]["tol"], 1e-6);
    assert_eq!(r["config"]["fd_fallback"], false);
    assert_eq!(r["config"]["node_budget"], 1000);
    assert_eq!(record(&r, "radical-endomorphism")["samples"], 7);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("report.json");
    let out = run(&["model-algebra", "--m", "3", "--out", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(r["command"], "model-algebra");
}

#[test]
fn emitted_specs_match_shipped_files() {
    for (model, size, file) in [
        ("cone", "3", "cone3.json"),
        ("cone", "2", "cone2.json"),
        ("hyperplane", "3", "hyperplane3.json"),
        ("sasakian", "1", "sasakian1.json"),
    ] {
        let out = run(&["emit-spec", model, size]);
        assert_eq!(out.status.code(), Some(0));
        let shipped = std::fs::read(spec(file)).unwrap();
        assert_eq!(out.stdout, shipped, "{file}");
    }
}

#[test]
fn node_budget_exhaustion_falls_back_or_errors() {
    let out = run_spec("curvature", "cone3.json", &["--node-budget", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["result"]["fallback"], true);
    assert_eq!(record(&r, "scale-bundle")["tolerance"], 1e-5);

    let out = run_spec("curvature", "cone3.json", &["--node-budget", "10", "--fd-fallback", "off"]);
    assert_eq!(out.status.code(), Some(3));
}
