use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name)
}

fn run(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_qlimit"))
        .args(args)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

fn run_config(name: &str, out: &Path, extra: &[&str]) -> i32 {
    let cfg = config(name);
    let mut args = vec!["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn passing_config_exits_zero_and_writes_a_summary() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run_config("sphere_dirac.json", out.path(), &[]), 0);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema"], "qlimit-summary/1");
    assert_eq!(summary["pass"], true);
    let check = &summary["checks"][0];
    assert_eq!(check["check"], "dirac");
    assert!(check["metrics"]["max_residual"]["value"].as_f64().unwrap() <= 1e-10);
    let csv = fs::read_to_string(out.path().join("00_dirac.csv")).unwrap();
    assert!(csv.starts_with("hbar,value,residual,slope_estimate"));
}

#[test]
fn failing_check_exits_one() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run_config("second_order_rejected.json", out.path(), &[]), 1);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], false);
}

#[test]
fn bad_configs_and_usage_exit_two() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run_config("unknown_label.json", out.path(), &[]), 2);
    assert!(!out.path().join("summary.json").exists());
    assert_eq!(run(&["run"]), 2);
    assert_eq!(run(&["run", "/nonexistent/config.json"]), 2);
    let bad = out.path().join("bad.json");
    fs::write(&bad, r#"{"scheme": {"kind": "fuzzy_sphere", "sizes": [1]}, "checks": [], "typo": 1}"#).unwrap();
    assert_eq!(run(&["run", bad.to_str().unwrap()]), 2);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run_config("torus_dirac.json", a.path(), &["--seed", "5", "--jobs", "1"]), 0);
    assert_eq!(run_config("torus_dirac.json", b.path(), &["--seed", "5", "--jobs", "3"]), 0);
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(fa.len() >= 2);
    assert_eq!(fa, fb);
}
