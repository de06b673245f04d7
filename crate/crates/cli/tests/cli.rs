use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use mms_lab::generators::Necklace;
use mms_lab::io::parse_space;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mms-lab"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .env("MMS_LAB_THREADS", "1")
        .args(args)
        .output()
        .unwrap()
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(name);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&v).unwrap()
}

fn report(dir: &Path, args: &[&str]) -> Value {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let errors: Vec<String> = schema("report.schema.json")
        .iter_errors(&v)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{args:?}: {errors:?}");
    v
}

fn gen(dir: &Path, kind: &str, params: &str, out: &str) {
    report(
        dir,
        &[
            "space", "gen", "--kind", kind, "--params", params, "--out", out,
        ],
    );
}

const TWO: &str = r#"{"points":[{"id":0},{"id":1}],"dist":[[0,1],[1,0]],"weights":[0.5,0.5]}"#;

#[test]
fn forced_coupling_costs_one_half() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("two.json"), TWO).unwrap();
    let v = report(
        dir.path(),
        &[
            "ot",
            "solve",
            "--space",
            "two.json",
            "--mu0",
            r#"{"atoms":[{"point":0,"mass":1}]}"#,
            "--mu1",
            r#"{"atoms":[{"point":0,"mass":0.5},{"point":1,"mass":0.5}]}"#,
        ],
    );
    assert_eq!(v["command"], "ot solve");
    assert_eq!(v["results"]["cost"], 0.5);
}

#[test]
fn scalar_bound_holds() {
    let dir = TempDir::new().unwrap();
    let v = report(
        dir.path(),
        &["mcp", "scalar-bound", "--t-grid", "201", "--d-grid", "201"],
    );
    assert_eq!(v["results"]["holds"], true);
    assert!(v["results"]["min_margin"].as_f64().unwrap() > 0.0);
}

#[test]
fn unknown_verb_prints_usage() {
    let out = run(Path::new("."), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(Path::new("."), &["--help"]).status.code(), Some(0));
}

#[test]
fn errors_are_machine_readable() {
    let out = run(
        Path::new("."),
        &["space", "validate", "--space", "/nonexistent/space.json"],
    );
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(schema("error.schema.json").is_valid(&v), "{v}");
    assert_eq!(v["error"]["kind"], "io");
}

#[test]
fn same_config_gives_identical_bytes() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "segment", r#"{"pitch":0.05}"#, "seg.json");
    let args = [
        "mcp", "verify", "--space", "seg.json", "--x", "0", "--A", "10..14", "--report", "r.json",
    ];
    assert!(run(dir.path(), &args).status.success());
    let first = std::fs::read(dir.path().join("r.json")).unwrap();
    assert!(run(dir.path(), &args).status.success());
    assert_eq!(first, std::fs::read(dir.path().join("r.json")).unwrap());
}

#[test]
fn mcp_csv_columns() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "segment", r#"{"pitch":0.05}"#, "seg.json");
    let out = run(
        dir.path(),
        &[
            "mcp", "verify", "--space", "seg.json", "--x", "0", "--A", "10..14", "--csv",
        ],
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        rows.headers().unwrap(),
        vec!["t", "cell", "lhs", "rhs", "slack"]
    );
    assert!(rows.records().count() > 0);
    // verbs without a table refuse
    assert_eq!(
        run(dir.path(), &["mcp", "scalar-bound", "--csv"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn strict_turns_inconclusive_into_exit_two() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "segment", r#"{"pitch":0.5}"#, "seg.json");
    let args = [
        "gh", "scan", "--space", "seg.json", "--x", "1", "--eps", "0.1", "--delta", "0.3",
    ];
    assert_eq!(run(dir.path(), &args).status.code(), Some(0));
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(run(dir.path(), &strict).status.code(), Some(2));
}

#[test]
fn seed_determines_escape_samples() {
    let dir = TempDir::new().unwrap();
    let a = report(
        dir.path(),
        &[
            "iso",
            "escape",
            "--dim",
            "3",
            "--samples",
            "20",
            "--seed",
            "7",
        ],
    );
    let b = report(
        dir.path(),
        &[
            "iso",
            "escape",
            "--dim",
            "3",
            "--samples",
            "20",
            "--seed",
            "7",
        ],
    );
    let c = report(
        dir.path(),
        &[
            "iso",
            "escape",
            "--dim",
            "3",
            "--samples",
            "20",
            "--seed",
            "8",
        ],
    );
    assert_eq!(a, b);
    assert_ne!(a["results"]["outcomes"], c["results"]["outcomes"]);
    assert_eq!(a["results"]["all_escaped"], true);
}

/// Every verb on a small input, each report checked against the schema.
#[test]
fn every_verb_reports() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(d.join("two.json"), TWO).unwrap();
    gen(d, "segment", r#"{"pitch":0.05}"#, "seg.json");
    gen(d, "earring", r#"{"n":3,"resolution":16}"#, "ear.json");
    gen(d, "circle", r#"{"radius":1.0,"count":40}"#, "circle.json");
    gen(d, "ball", r#"{"k":2,"r":1.0,"pitch":0.25}"#, "ball.json");
    gen(
        d,
        "necklace",
        r#"{"beads":[{"x":0.4,"r":0.3},{"x":1.1,"r":0.3}],"pitch":0.01}"#,
        "neck.json",
    );

    let v = report(d, &["space", "validate", "--space", "ear.json"]);
    assert_eq!(v["results"]["valid"], true);

    let mu0 = r#"{"atoms":[{"point":0,"mass":0.5},{"point":1,"mass":0.5}]}"#;
    let mu1 = r#"{"atoms":[{"point":1,"mass":0.5},{"point":0,"mass":0.5}]}"#;
    let v = report(
        d,
        &[
            "ot", "probe", "--space", "two.json", "--mu0", mu0, "--mu1", mu1,
        ],
    );
    assert_eq!(v["results"]["unique"], true);

    let ear = parse_space(&std::fs::read_to_string(d.join("ear.json")).unwrap()).unwrap();
    let e = mms_lab::generators::Earring::from_space(&ear).unwrap();
    let f = serde_json::to_string(&e.reflection(1)).unwrap();
    let a_sel = format!("{}..{}", e.point(2, 3), e.point(2, 5));
    let x = e.point(1, 4).to_string();
    let v = report(
        d,
        &[
            "ot",
            "competitor",
            "--space",
            "ear.json",
            "--f",
            &f,
            "--A",
            &a_sel,
            "--x",
            &x,
        ],
    );
    assert_eq!(v["results"]["non_unique"], true);
    let v = report(
        d,
        &[
            "ot",
            "competitor",
            "--space",
            "ear.json",
            "--f",
            &f,
            "--A",
            &a_sel,
            "--x",
            &x,
            "--variant",
            "ball",
            "--radius",
            "0.1",
        ],
    );
    assert_eq!(v["results"]["report"]["marginals_equal"], true);

    let neck_space = parse_space(&std::fs::read_to_string(d.join("neck.json")).unwrap()).unwrap();
    let n = Necklace::from_space(&neck_space).unwrap();
    let z = (n.column(n.nearest_column(0.4)).cells.start + 1).to_string();
    let col = n.column(n.nearest_column(1.1)).cells.clone();
    let a_neck = format!("{}..{}", col.start, col.start + 1);
    let v = report(
        d,
        &[
            "mcp",
            "schedule",
            "--space",
            "neck.json",
            "--z",
            &z,
            "--A",
            &a_neck,
            "--allowance",
            "0.08",
        ],
    );
    assert!(v["results"]["max_ratio"].as_f64().unwrap() > 0.0);
    let v = report(
        d,
        &[
            "mcp",
            "verify",
            "--space",
            "neck.json",
            "--x",
            &z,
            "--A",
            &a_neck,
            "--plan",
            "schedule",
        ],
    );
    assert!(v["results"]["records"].as_array().unwrap().len() > 0);

    let v = report(d, &["iso", "enum", "--space", "ear.json"]);
    assert_eq!(v["results"]["count"], 8);
    let v = report(
        d,
        &[
            "iso", "fix", "--space", "ear.json", "--x", "0", "--big-n", "1",
        ],
    );
    assert_eq!(v["results"]["maps"].as_array().unwrap().len(), 8);
    let v = report(d, &["iso", "fix", "--space", "ear.json", "--g", &f]);
    assert_eq!(v["results"]["maps"].as_array().unwrap().len(), 1);
    report(
        d,
        &[
            "iso",
            "displacement",
            "--space",
            "ear.json",
            "--x",
            "0",
            "--r",
            "1.0",
            "--gen",
            &f,
        ],
    );
    report(
        d,
        &[
            "iso",
            "condition-a",
            "--space",
            "ear.json",
            "--x",
            "0",
            "--s",
            "1.0",
        ],
    );
    let v = report(d, &["iso", "probe", "--space", "ear.json", "--eps", "0.5"]);
    assert!(v["results"]["probe"]["verdict"].is_string());
    let rot: Vec<usize> = (0..40).map(|i| (i + 1) % 40).collect();
    let rot = serde_json::to_string(&rot).unwrap();
    let v = report(
        d,
        &[
            "iso",
            "critical-scale",
            "--space",
            "circle.json",
            "--x",
            "0",
            "--lo",
            "0.001",
            "--hi",
            "100",
            "--gen",
            &rot,
        ],
    );
    assert_eq!(v["results"]["result"]["outcome"], "crossing");

    let v = report(
        d,
        &["gh", "exact", "--space", "two.json", "--space2", "two.json"],
    );
    assert_eq!(v["results"]["distance"], 0.0);
    let v = report(
        d,
        &[
            "gh",
            "scan",
            "--space",
            "seg.json",
            "--x",
            "10",
            "--eps",
            "0.2",
            "--delta",
            "1.0",
            "--k",
            "1",
            "--r-samples",
            "3",
        ],
    );
    assert_eq!(v["results"]["per_k"][0]["k"], 1);
    let v = report(
        d,
        &[
            "gh",
            "regular-mass",
            "--space",
            "ball.json",
            "--eps",
            "0.3",
            "--delta",
            "0.8",
            "--k",
            "2",
            "--budget",
            "3",
            "--r-samples",
            "2",
        ],
    );
    assert!(v["results"]["scanned_mass"].as_f64().unwrap() > 0.0);
}
