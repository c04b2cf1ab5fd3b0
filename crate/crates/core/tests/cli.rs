// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn scmc(args: &[&str]) -> Run {
    let (mut out, mut err) = (vec![], vec![]);
    let code = scmc::cli::run(
        std::iter::once("scmc").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn workdir(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("scmc-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a built-in model into `dir` and returns (model, partition).
fn demo(dir: &Path, name: &str, param: Option<&str>) -> (PathBuf, PathBuf) {
    let mut args = vec!["demo", name];
    args.extend(param);
    args.extend(["--out", s(dir)]);
    let r = scmc(&args);
    assert_eq!(r.code, 0, "{}", r.err);
    let written = |suffix: &str| {
        let line = r
            .out
            .lines()
            .find(|l| l.starts_with("wrote ") && l.ends_with(suffix));
        PathBuf::from(&line.expect("demo output names its files")[6..])
    };
    (written(".model.json"), written(".partition.json"))
}

fn edit(path: &Path, f: impl FnOnce(&mut Value)) {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    f(&mut v);
    fs::write(path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
}

#[test]
fn validate_accepts_built_in_models() {
    let d = workdir("validate");
    for name in [
        "dominoes",
        "firing_squad",
        "step_by_step",
        "platformer",
        "tool_wear",
    ] {
        let (m, _) = demo(&d, name, None);
        let r = scmc(&["validate", s(&m)]);
        assert_eq!(r.code, 0, "{name}: {}", r.out);
    }
}

#[test]
fn validate_reports_cycles() {
    let d = workdir("cycle");
    let (m, _) = demo(&d, "dominoes", Some("2"));
    edit(&m, |v| {
        v["endogenous"][0]["eq"] = json!({"ref": "S", "index": 2})
    });
    let r = scmc(&["validate", s(&m)]);
    assert_eq!(r.code, 1);
    assert!(r.out.contains("Cycle"), "{}", r.out);

    let r = scmc(&["--json", "validate", s(&m)]);
    assert_eq!(r.code, 1);
    let j: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(j["valid"], json!(false));
    assert_eq!(j["findings"][0]["kind"], json!("Cycle"));
}

#[test]
fn validate_reports_unclosed_explicit_spaces() {
    let d = workdir("closure");
    let (m, _) = demo(&d, "dominoes", Some("2"));
    edit(
        &m,
        |v| {
            v["interventions"] =
                json!({"mode": "explicit", "sets": [{}, {"S_1": true, "S_2": true}]})
        },
    );
    let r = scmc(&["validate", s(&m)]);
    assert_eq!(r.code, 1);
    assert!(r.out.contains("ClosureViolation"), "{}", r.out);
}

#[test]
fn malformed_documents_are_parse_errors() {
    let d = workdir("parse");
    let m = d.join("bad.json");
    fs::write(&m, "{\n  \"name\": \"x\",\n  \"bogus\": 1\n}\n").unwrap();
    let r = scmc(&["--json", "validate", s(&m)]);
    assert_eq!(r.code, 1);
    let j: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(j["error"], json!("ParseError"));
    let r = scmc(&["validate", s(&d.join("missing.json"))]);
    assert_eq!(r.code, 1);
    assert!(r.err.starts_with("error:"), "{}", r.err);
}

#[test]
fn eval_prints_csv() {
    let d = workdir("eval");
    let (m, _) = demo(&d, "dominoes", Some("3"));
    let r = scmc(&["eval", s(&m), "--exo", "push=true", "--do", "S_2=false"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(
        r.out,
        "draw_index,variable,value\n0,S_1,true\n0,S_2,false\n0,S_3,false\n"
    );
    let r = scmc(&["eval", s(&m), "--samples", "4", "--seed", "7"]);
    assert_eq!(r.out.lines().count(), 1 + 4 * 3);
    assert_eq!(
        r.out,
        scmc(&["eval", s(&m), "--samples", "4", "--seed", "7"]).out
    );
}

#[test]
fn eval_rejects_disallowed_interventions() {
    let d = workdir("notallowed");
    let (m, _) = demo(&d, "dominoes", Some("3"));
    // singleton space: two atoms at once are not allowed
    let r = scmc(&[
        "--json",
        "eval",
        s(&m),
        "--exo",
        "push=true",
        "--do",
        "S_1=true",
        "--do",
        "S_2=true",
    ]);
    assert_eq!(r.code, 1);
    let j: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(j["error"], json!("InterventionNotAllowed"));
    let r = scmc(&["--json", "eval", s(&m)]);
    assert_eq!(
        serde_json::from_str::<Value>(&r.out).unwrap()["error"],
        json!("MissingExogenous")
    );
}

#[test]
fn consolidate_and_verify() {
    let d = workdir("consolidate");
    let (m, p) = demo(&d, "step_by_step", None);
    let c = d.join("c.json");
    let r = scmc(&[
        "consolidate",
        s(&m),
        s(&p),
        "--targets",
        "F,G,C,H",
        "-o",
        s(&c),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.contains("marginalized: D"), "{}", r.out);
    assert!(r.out.contains("total: 49 -> 17 nodes"), "{}", r.out);

    let r = scmc(&["verify", s(&m), s(&c), "--exhaustive"]);
    assert_eq!(r.code, 0, "{}", r.out);
    assert!(r.out.starts_with("verdict: Equal"));

    // stdout variant writes the same document
    let r = scmc(&["consolidate", s(&m), s(&p), "--targets", "F,G,C,H"]);
    assert_eq!(r.out, fs::read_to_string(&c).unwrap());

    // break the document: H always true
    edit(&c, |v| {
        for comp in v["components"].as_array_mut().unwrap() {
            for t in comp["targets"].as_array_mut().into_iter().flatten() {
                if t["name"] == json!("H") {
                    t["rho"] = json!(true);
                }
            }
        }
    });
    let r = scmc(&["verify", s(&m), s(&c)]);
    assert_eq!(r.code, 1, "{}{}", r.out, r.err);
    assert!(r.out.contains("verdict: CounterExample"), "{}", r.out);
    assert!(r.out.contains("scmc eval"), "{}", r.out);
    let r = scmc(&["--json", "verify", s(&m), s(&c)]);
    let j: Value = serde_json::from_str(&r.out).unwrap();
    assert!(j["replay"].as_str().unwrap().starts_with("scmc eval"));

    let r = scmc(&["verify", s(&m), s(&d.join("nothing.json"))]);
    assert_eq!(r.code, 3);
}

#[test]
fn consolidate_without_clusters_keeps_sizes() {
    let d = workdir("none");
    let (m, p) = demo(&d, "step_by_step", None);
    let c = d.join("c.json");
    let r = scmc(&[
        "--json",
        "consolidate",
        s(&m),
        s(&p),
        "--clusters",
        "none",
        "-o",
        s(&c),
    ]);
    assert_eq!(r.code, 0, "{}", r.out);
    let j: Value = serde_json::from_str(&r.out).unwrap();
    let clusters = j["clusters"].as_array().unwrap();
    assert!(
        clusters
            .iter()
            .all(|c| c["nodes_before"] == c["nodes_after"]),
        "{j}"
    );
    assert_eq!(scmc(&["verify", s(&m), s(&c)]).code, 0);
}

#[test]
fn consolidate_rejects_bad_inputs() {
    let d = workdir("badinput");
    let (m, p) = demo(&d, "step_by_step", None);
    let r = scmc(&["--json", "consolidate", s(&m), s(&p), "--targets", "Nope"]);
    assert_eq!(
        serde_json::from_str::<Value>(&r.out).unwrap()["error"],
        json!("InvalidTarget")
    );
    // C reads B and D reads C, so the clusters depend on each other
    edit(&p, |v| {
        *v = json!({"clusters": [["B", "D"], ["C", "E", "F", "G", "H"]]})
    });
    let r = scmc(&["--json", "consolidate", s(&m), s(&p)]);
    assert_eq!(r.code, 1);
    let kind = serde_json::from_str::<Value>(&r.out).unwrap()["error"].clone();
    assert!(
        kind == json!("InvalidPartition") || kind == json!("DocumentError"),
        "{}",
        r.out
    );
}

#[test]
fn metrics_on_the_matrix_chain() {
    let d = workdir("metrics");
    let (m, _) = demo(&d, "matrix_chain", None);
    let r = scmc(&["metrics", s(&m)]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(
        r.out.contains("linear Z<-Y 3x2 nnz 3 (direct)"),
        "{}",
        r.out
    );
    assert!(
        r.out.contains("linear Y<-X 2x3 nnz 2 (direct)"),
        "{}",
        r.out
    );
    assert!(
        r.out.contains("linear Z<-X 3x3 nnz 6 (composed)"),
        "{}",
        r.out
    );
    let j: Value = serde_json::from_str(&scmc(&["--json", "metrics", s(&m)]).out).unwrap();
    assert_eq!(j["linear_maps"].as_array().unwrap().len(), 3);
}

#[test]
fn dot_export_is_deterministic() {
    let d = workdir("dot");
    let (m, _) = demo(&d, "firing_squad", None);
    let a = scmc(&["export-dot", s(&m)]);
    assert_eq!(a.code, 0);
    assert!(
        a.out.starts_with("digraph \"firing_squad_5\" {"),
        "{}",
        a.out
    );
    assert_eq!(a.out, scmc(&["export-dot", s(&m)]).out);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(scmc(&["frobnicate"]).code, 2);
    let r = scmc(&["--json", "verify"]);
    assert_eq!(r.code, 2);
    assert_eq!(
        serde_json::from_str::<Value>(&r.out).unwrap()["error"],
        json!("UsageError")
    );
    let d = workdir("unknown");
    let r = scmc(&["--json", "demo", "nothing", "--out", s(&d)]);
    assert_eq!(
        serde_json::from_str::<Value>(&r.out).unwrap()["error"],
        json!("UnknownModel")
    );
}
