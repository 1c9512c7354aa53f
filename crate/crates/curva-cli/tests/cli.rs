use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn curva(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curva")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_writes_trace_report_and_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = curva(&["solve", "--config", path(&config("surface_disk.json")), "--out-dir", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("k,increment,min_u,max_u,res_interior,res_boundary\n"));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scenario"], "TwoD_Kneg");
    assert!(report["runtime_s"].is_null());
    assert!(report["errors"]["boundary_sup"].as_f64().unwrap() < 1e-3);
    assert!(dir.path().join("solution.csv").exists());
}

#[test]
fn identical_runs_give_identical_files() {
    let cfg = config("surface_disk.json");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = curva(&["certify", "--config", path(&cfg), "--out-dir", path(d.path())]);
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["trace.csv", "report.json", "solution.csv"] {
        let a = fs::read(dirs[0].path().join(f)).unwrap();
        let b = fs::read(dirs[1].path().join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn verify_reproduces_the_stored_report() {
    let cfg = config("neg_ball.json");
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(curva(&["solve", "--config", path(&cfg), "--out-dir", path(dir.path())]).status.code(), Some(0));
    let again = dir.path().join("again.json");
    let out = curva(&[
        "verify",
        "--config",
        path(&cfg),
        "--solution",
        path(&dir.path().join("solution.csv")),
        "--report",
        path(&again),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let read = |p: &Path| serde_json::from_slice::<serde_json::Value>(&fs::read(p).unwrap()).unwrap();
    let (a, b) = (read(&dir.path().join("report.json")), read(&again));
    assert_eq!(a["errors"], b["errors"]);
    assert_eq!(a["grid"], b["grid"]);
}

#[test]
fn unknown_config_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("neg_ball.json")).unwrap().replace("\"n_r\"", "\"mesh\": 2, \"n_r\"");
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, text).unwrap();
    let out = curva(&["solve", "--config", path(&cfg), "--out-dir", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mesh") && err.contains("domain"), "{err}");
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn failing_scenarios_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("neg_ball.json")).unwrap().replace("\"interior\": \"-1\"", "\"interior\": \"1\"");
    let cfg = dir.path().join("wrong_tag.json");
    fs::write(&cfg, text).unwrap();
    let out = curva(&["solve", "--config", path(&cfg), "--out-dir", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Classification"));

    let out = curva(&["certify", "--config", path(&config("positive_ball.json")), "--out-dir", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Bracket"));
}

#[test]
fn sweep_lists_every_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = curva(&[
        "sweep",
        "--config",
        path(&config("surface_disk.json")),
        "--levels",
        "2",
        "--out-dir",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("0,33,32,") && rows[2].starts_with("1,65,64,"));
    assert!(rows[1..].iter().all(|r| r.contains(",certified,")));
}

#[test]
fn eigen_prints_a_monotone_sweep() {
    let out = curva(&["eigen", "--config", path(&config("neg_ball.json")), "--betas", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let etas: Vec<f64> =
        text.lines().skip(2).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(etas.len(), 5);
    assert!(etas.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn missing_scale_is_a_usage_error() {
    let out = curva(&["solve", "--config", path(&config("positive_ball.json"))]);
    assert_eq!(out.status.code(), Some(1));
    let out = curva(&["solve", "--config", "/nonexistent.json"]);
    assert_eq!(out.status.code(), Some(1));
}
