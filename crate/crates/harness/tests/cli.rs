mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use common::config_path;
use serde_json::Value;

fn grassmpc(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_grassmpc"))
        .args(args)
        .output()
        .expect("binary runs");
    let text =
        String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().expect("exit code"), text)
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> (i32, String) {
    let mut args = vec![
        cmd,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    grassmpc(&args)
}

/// Short-horizon pendulum with a full-span subspace.
fn small_pendulum(dir: &Path, subspace_dim: usize, samples: usize) -> std::path::PathBuf {
    let text = format!(
        r#"
name = "small"
seed = 5

[model]
q = [[1.0, 0.0], [0.0, 1.0]]
r = [[0.1]]
state_bounds = [1.0, 0.35]
input_bounds = [1.0]
horizon = 5
desired_horizon = 5

[model.dynamics]
kind = "continuous"
a = [[0.0, 1.0], [1.0, 0.0]]
b = [[0.0], [1.0]]
ts = 0.1

[design]
subspace_dim = {subspace_dim}
samples = {samples}
directions = 16

[benchmark]
grid = 5
"#
    );
    let path = dir.join("small.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_pendulum(dir.path(), 2, 0);
    let (code, text) = run("generate", &cfg, dir.path(), &[]);
    assert_eq!(code, 2, "{text}");
    assert!(text.contains("samples"));

    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, "name = \"x\"\nbogus = 1\n").unwrap();
    assert_eq!(run("selftest", &unknown, dir.path(), &[]).0, 2);
    let (code, _) = run(
        "generate",
        &dir.path().join("missing.toml"),
        dir.path(),
        &[],
    );
    assert_eq!(code, 2);
}

#[test]
fn euclidean_toy_exits_with_4_and_riemannian_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config_path("two_boxes.toml")).unwrap();
    let euclid = dir.path().join("euclid.toml");
    fs::write(
        &euclid,
        text.replace("method = \"riemannian\"", "method = \"euclidean\""),
    )
    .unwrap();
    let (code, msg) = run("design", &euclid, dir.path(), &[]);
    assert_eq!(code, 4, "{msg}");
    assert!(msg.contains("iteration 0"), "{msg}");

    let (code, msg) = run("design", &config_path("two_boxes.toml"), dir.path(), &[]);
    assert_eq!(code, 0, "{msg}");
    let file: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("subspace.json")).unwrap())
            .unwrap();
    assert_eq!(file["certificate"]["admissible"], Value::Bool(true));
    let u: Vec<f64> = file["u"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r[0].as_f64().unwrap())
        .collect();
    assert!(
        (u[0].abs() - u[1].abs()).abs() < 1e-4,
        "basis {u:?} is not the diagonal"
    );
}

#[test]
fn same_seed_gives_identical_dataset_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_pendulum(dir.path(), 2, 40);
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    assert_eq!(run("generate", &cfg, &a, &[]).0, 0);
    assert_eq!(run("generate", &cfg, &b, &[]).0, 0);
    assert_eq!(run("generate", &cfg, &c, &["--seed", "6"]).0, 0);
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    assert_eq!(read(&a, "dataset.csv"), read(&b, "dataset.csv"));
    assert_eq!(read(&a, "dataset.json"), read(&b, "dataset.json"));
    assert_ne!(read(&a, "dataset.csv"), read(&c, "dataset.csv"));
    let rows = String::from_utf8(read(&a, "dataset.csv")).unwrap();
    assert_eq!(rows.lines().count(), 41);
    assert_eq!(rows.lines().next().unwrap(), "x0,x1,z0,z1,z2,z3,z4");
}

#[test]
fn full_span_pipeline_matches_the_reference() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_pendulum(dir.path(), 5, 30);
    let out = dir.path().join("run");
    assert_eq!(run("generate", &cfg, &out, &[]).0, 0);
    let (code, msg) = run("design", &cfg, &out, &[]);
    assert_eq!(code, 0, "{msg}");
    let (code, msg) = run("benchmark", &cfg, &out, &[]);
    assert_eq!(code, 0, "{msg}");
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("benchmark.json")).unwrap()).unwrap();
    assert!(report["evaluated"].as_u64().unwrap() > 0);
    assert!(
        report["max_epsilon"].as_f64().unwrap() <= 1e-6,
        "{}",
        report["max_epsilon"]
    );
    let csv = fs::read_to_string(out.join("benchmark.csv")).unwrap();
    assert!(csv.starts_with("index,x0,x1,initial_value"));
    assert!(out.join("decrease.csv").exists());
}

#[test]
fn benchmark_without_design_fails_and_selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_pendulum(dir.path(), 2, 20);
    assert_eq!(run("benchmark", &cfg, dir.path(), &[]).0, 1);
    let (code, msg) = run("selftest", &cfg, dir.path(), &[]);
    assert_eq!(code, 0, "{msg}");
    let checks: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("selftest.json")).unwrap())
            .unwrap();
    assert!(checks
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["passed"] == Value::Bool(true)));
}

#[test]
fn json_configs_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let json = r#"{
        "name": "toy",
        "geometry": {
            "deltas": [[-1.0, 0.1], [1.0, -0.1], [2.0, 0.1]],
            "boxes": [{"lower": [-3.0, -3.0], "upper": [3.0, 3.0]}]
        },
        "design": {"subspace_dim": 1}
    }"#;
    let path = dir.path().join("toy.json");
    fs::write(&path, json).unwrap();
    let (code, msg) = run("design", &path, dir.path(), &[]);
    assert_eq!(code, 0, "{msg}");
}
