use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gripper(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gripper"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr `{text}` is not JSON: {e}"))
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// Writes the square example into `dir` and returns its file name.
fn square(dir: &Path) -> &'static str {
    let out = gripper(&["example"], dir);
    assert!(out.status.success());
    fs::write(dir.join("square.jsonl"), &out.stdout).unwrap();
    "square.jsonl"
}

const SMALL: [&str; 8] = [
    "--starts",
    "2",
    "--iters",
    "6",
    "--param",
    "ny=16",
    "--param",
    "nlp_iterations=6",
];

#[test]
fn example_output_validates() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["square", "two-rectangles"] {
        let out = gripper(&["example", name], dir.path());
        assert!(out.status.success());
        fs::write(dir.path().join("p.jsonl"), &out.stdout).unwrap();
        let v = gripper(&["validate", "p.jsonl"], dir.path());
        assert_eq!(
            v.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&v.stderr)
        );
        assert_eq!(stdout_json(&v)["valid"], Value::Bool(true));
    }
}

#[test]
fn overrides_reach_the_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let p = square(dir.path());
    let out = gripper(
        &[
            "validate",
            p,
            "--seed",
            "7",
            "--iters",
            "3",
            "--param",
            "mu=0.45",
            "--param",
            "stage_a=false",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let params = &stdout_json(&out)["params"];
    assert_eq!(params["seed"], 7);
    assert_eq!(params["iterations"], 3);
    assert_eq!(params["mu"], 0.45);
    assert_eq!(params["stage_a"], false);
}

#[test]
fn bad_inputs_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let p = square(dir.path());
    let text = fs::read_to_string(dir.path().join(p)).unwrap();
    fs::write(
        dir.path().join("edge.jsonl"),
        text.replace("\"edge\":1", "\"edge\":7"),
    )
    .unwrap();
    fs::write(
        dir.path().join("version.jsonl"),
        text.replace("\"version\":1", "\"version\":9"),
    )
    .unwrap();
    fs::write(dir.path().join("broken.jsonl"), "{\"type\":\n").unwrap();

    let cases: [(&[&str], &str); 6] = [
        (&["validate", "edge.jsonl"], "validation"),
        (&["validate", "version.jsonl"], "version"),
        (&["validate", "broken.jsonl"], "parse"),
        (&["validate", "missing.jsonl"], "io"),
        (&["validate", p, "--param", "bogus=1"], "validation"),
        (&["solve", p, "--param", "mu=-1"], "validation"),
    ];
    for (args, kind) in cases {
        let out = gripper(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = stderr_json(&out);
        assert_eq!(err["error"], kind, "{args:?}: {err}");
        assert_eq!(err["exit_code"], 2);
    }
    let err = stderr_json(&gripper(&["validate", "edge.jsonl"], dir.path()));
    assert!(
        err["message"].as_str().unwrap().contains("contact[1]"),
        "{err}"
    );
    // a failed solve writes nothing
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_render_mode_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gripper(&["render", "any.jsonl", "--mode", "bogus"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown render mode"));
}

#[test]
fn theta_bounds_of_the_square() {
    let dir = tempfile::tempdir().unwrap();
    let p = square(dir.path());
    let out = gripper(&["theta-bounds", p], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let deg = &stdout_json(&out)["objects"][0]["degrees"];
    let (lo, hi) = (deg[0].as_f64().unwrap(), deg[1].as_f64().unwrap());
    assert!(
        (lo + hi).abs() < 1e-9 && hi > 80.0 && hi < 90.0,
        "{lo} {hi}"
    );
}

#[test]
fn solve_then_render() {
    let dir = tempfile::tempdir().unwrap();
    let p = square(dir.path());
    let mut args = vec!["solve", p, "--out", "run"];
    args.extend(SMALL);
    let out = gripper(&args, dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = stdout_json(&out);
    assert_eq!(summary["status"], "success");
    let first = summary["candidates"][0]["file"]
        .as_str()
        .unwrap()
        .to_string();
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["exit_code"], 0);

    let solution = format!("run/{first}");
    let r = gripper(&["render", &solution, "--out", "svg"], dir.path());
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let written = stdout_json(&r)["written"].as_array().unwrap().len();
    assert_eq!(written, 3, "one document per mode for a single object");
    let stem = first.trim_end_matches(".jsonl");
    let grasp = fs::read_to_string(dir.path().join(format!("svg/{stem}-grasp.svg"))).unwrap();
    assert!(grasp.contains("<svg"));

    // the solution file alone reproduces the same bytes
    let again = gripper(
        &["render", &solution, "--mode", "grasp", "--out", "svg2"],
        dir.path(),
    );
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(
        fs::read_to_string(dir.path().join(format!("svg2/{stem}-grasp.svg"))).unwrap(),
        grasp
    );
}

#[test]
fn fixed_seed_solves_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = square(dir.path());
    for out_dir in ["a", "b"] {
        let mut args = vec!["solve", p, "--seed", "11", "--out", out_dir];
        args.extend(SMALL);
        assert_eq!(gripper(&args, dir.path()).status.code(), Some(0));
    }
    let names: Vec<String> = fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".jsonl"))
        .collect();
    assert!(!names.is_empty());
    for n in names {
        assert_eq!(
            fs::read(dir.path().join("a").join(&n)).unwrap(),
            fs::read(dir.path().join("b").join(&n)).unwrap(),
            "{n}"
        );
    }
}

#[test]
fn problem_without_squeeze_grasp_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let p = square(dir.path());
    // both jaws on the bottom edge: no squeeze equilibrium at any orientation
    let text = fs::read_to_string(dir.path().join(p))
        .unwrap()
        .replace("\"edge\":3", "\"edge\":0")
        .replace("\"edge\":1", "\"edge\":0");
    fs::write(dir.path().join("flat.jsonl"), text).unwrap();

    let bounds = gripper(&["theta-bounds", "flat.jsonl"], dir.path());
    assert_eq!(bounds.status.code(), Some(3));
    assert_eq!(stderr_json(&bounds)["error"], "no_squeeze_grasp");

    let mut args = vec!["solve", "flat.jsonl", "--out", "run"];
    args.extend(SMALL);
    let out = gripper(&args, dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "no_survivor");
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["exit_code"], 3);
    assert!(manifest["candidates"].as_array().unwrap().is_empty());
}
