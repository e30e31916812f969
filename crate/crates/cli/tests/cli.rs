use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
seed = 9

[maxineq]
grid = { n_modes = 64, kind = "laplacian" }
lambdas = [10.0, 100.0, 1000.0]
dt = 0.01
horizon = 0.5
paths = 300
bootstrap = 50

[simulate]
grid = { n_modes = 16, kind = "laplacian" }
dt = 0.001
horizon = 0.02
stride = 5
paths = 3
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spde-lab"));
    c.env_remove("SPDE_LAB_SEED");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let config = dir.join("run.toml");
    std::fs::write(&config, SMALL).unwrap();
    bin()
        .arg("--config")
        .arg(&config)
        .arg("--quiet")
        .args(args)
        .output()
        .unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn maxineq_passes_and_rerun_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = run(tmp.path(), &["maxineq", "--out", a.to_str().unwrap(), "--workers", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(tmp.path(), &["maxineq", "--out", b.to_str().unwrap(), "--workers", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let csv_a = std::fs::read(a.join("metrics.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.join("metrics.csv")).unwrap());
    let r = report(&a);
    assert_eq!(r["experiment"], "maxineq");
    assert_eq!(r["seed"], 9);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(r["config"]["paths"], 300);
}

#[test]
fn seed_flag_and_env_override_config() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("s");
    let out = run(
        tmp.path(),
        &["simulate", "--out", out_dir.to_str().unwrap(), "--seed", "41"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out_dir)["seed"], 41);

    let config = tmp.path().join("run.toml");
    let env_dir = tmp.path().join("e");
    let out = bin()
        .env("SPDE_LAB_SEED", "77")
        .args(["--quiet", "simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&env_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&env_dir)["seed"], 77);
}

#[test]
fn paths_override_and_dump() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("d");
    let out = run(
        tmp.path(),
        &[
            "simulate",
            "--paths",
            "2",
            "--dump-paths",
            "--out",
            out_dir.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let mut files: Vec<_> = std::fs::read_dir(out_dir.join("paths"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["path_00000.csv", "path_00001.csv"]);
    let text = std::fs::read_to_string(out_dir.join("paths/path_00000.csv")).unwrap();
    assert!(text.starts_with("time,h_norm,sup_norm\n"));
    assert_eq!(report(&out_dir)["config"]["paths"], 2);
}

#[test]
fn infeasible_plan_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("bad.json");
    std::fs::write(
        &config,
        r#"{"couple": {"diffusion": {"kind": "bounded_holder_power", "floor": 0.5, "exponent": 0.7, "cap": 1.0}}}"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("o");
    let out = bin()
        .arg("couple")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("H3"), "{stderr}");
    assert!(!out_dir.exists(), "no output on config errors");
}

#[test]
fn malformed_config_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("bad.toml");
    std::fs::write(&config, "[maxineq\n").unwrap();
    let out = bin().arg("maxineq").arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_check_exits_with_one() {
    // A huge constant forcing pushes the state past the blow-up sentinel.
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("fail.toml");
    std::fs::write(
        &config,
        r#"
[simulate]
grid = { n_modes = 8, kind = "laplacian" }
drift = { kind = "constant", value = 1e9 }
dt = 0.001
horizon = 0.5
paths = 2
"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("f");
    let out = bin()
        .args(["--quiet", "simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&out_dir)["checks"][0]["passed"], false);
}
