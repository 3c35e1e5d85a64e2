use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lmo-optim"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(out: &Path, args: &[&str], file: &Path) -> Output {
    bin().arg("--quiet").arg("--out").arg(out).args(args).arg(file).output().unwrap()
}

#[test]
fn run_writes_identical_csvs_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(out, &["run"], &config("minimal_quadratic.json"));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = std::fs::read(a.join("run.csv")).unwrap();
    assert_eq!(csv, std::fs::read(b.join("run.csv")).unwrap());
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 2 + 100);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["steps_completed"], 100);
    assert!(summary["best_loss"].as_f64().unwrap() < summary["initial_loss"].as_f64().unwrap());
}

#[test]
fn seed_flag_changes_noisy_runs() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("noisy.json");
    std::fs::write(
        &file,
        r#"{"problem": {"family": "quadratic_diag", "rows": 4, "cols": 3, "curvature": {"kind": "constant", "value": 1.0},
            "target": {"kind": "gaussian", "scale": 1.0}}, "noise": {"family": "gaussian", "scale": 0.5}, "total_steps": 10}"#,
    )
    .unwrap();
    let read = |seed: &str| {
        let out = dir.path().join(seed);
        assert!(bin().args(["--quiet", "--seed", seed, "--out"]).arg(&out).arg("run").arg(&file).status().unwrap().success());
        std::fs::read(out.join("run.csv")).unwrap()
    };
    assert_eq!(read("1"), read("1"));
    assert_ne!(read("1"), read("2"));
}

#[test]
fn invalid_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad_period = dir.path().join("p.json");
    std::fs::write(
        &bad_period,
        r#"{"problem": {"family": "logistic"}, "optimizer": {"period": 3}, "total_steps": 10}"#,
    )
    .unwrap();
    let o = run(dir.path(), &["run"], &bad_period);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("divisible"));

    let typo = dir.path().join("t.json");
    std::fs::write(&typo, r#"{"problem": {"family": "logistic"}, "total_step": 10}"#).unwrap();
    let o = run(dir.path(), &["run"], &typo);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("total_step"));

    let o = run(dir.path(), &["run"], &dir.path().join("missing.json"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn theory_and_flops_reports() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["theory"], &config("theory.json")).status.success());
    let theory: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("theory.json")).unwrap()).unwrap();
    for key in ["constants", "bound_terms", "optimal_params", "phi_table", "case_label"] {
        assert!(theory.get(key).is_some(), "missing {key}");
    }
    assert_eq!(theory["phi_table"].as_array().unwrap().len(), 20);

    assert!(run(dir.path(), &["flops"], &config("flops.json")).status.success());
    let flops: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("flops.json")).unwrap()).unwrap();
    let shapes = flops["shapes"].as_array().unwrap();
    assert_eq!(shapes.len(), 3);
    assert_eq!(shapes[0]["name"], "124M");
}

#[test]
fn oracle_exits_cleanly() {
    let o = bin().arg("oracle").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6);
}

#[test]
fn sweep_writes_table_and_best_cell() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("sweep.json");
    std::fs::write(
        &file,
        r#"{"base": {"problem": {"family": "quadratic_diag", "rows": 5, "cols": 5}, "total_steps": 20},
            "axes": {"eta_m": [0.01, 0.05], "eta_l": [0.001, 0.01]}}"#,
    )
    .unwrap();
    let o = run(dir.path(), &["sweep"], &file);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(dir.path().join("best.json").exists());
    assert_eq!(std::fs::read_dir(dir.path().join("cells")).unwrap().count(), 4);
}
