use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

const DISCRETE_LAW: &str = r#"{"variant": "garch_critical", "beta": 1.0, "lambda": 1.0,
  "noise": {"variant": "discrete", "points": [[1.4142135623730951, 0.25], [0.0, 0.5], [-1.4142135623730951, 0.25]]}}"#;

fn srelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srelab"))
        .args(args)
        .env_remove("SRELAB_OUT")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn constants_for_discrete_critical_garch() {
    let tmp = tempfile::tempdir().unwrap();
    let law = write(tmp.path(), "law.json", DISCRETE_LAW);
    let out = tmp.path().join("out");
    let o = srelab(&["constants", "--law", &law, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let json_end = stdout.find("\nPASS").unwrap();
    let table: serde_json::Value = serde_json::from_str(&stdout[..json_end]).unwrap();
    let c = &table["constants"];
    let ln2 = 2f64.ln();
    assert_eq!(c["kappa"].as_f64(), Some(1.0));
    assert!((c["m"].as_f64().unwrap() - ln2).abs() < 1e-10);
    assert_eq!(c["d"]["value"].as_f64(), Some(1.0));
    assert!((c["c_prime"].as_f64().unwrap() - 1.0 / ln2).abs() < 1e-10);
    assert!(out.join("report.json").exists() && out.join("curves.csv").exists());
}

#[test]
fn missing_law_exits_1_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = srelab(&["truncmoment", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    assert!(!out.exists());
}

#[test]
fn unknown_subcommand_exits_1() {
    assert_eq!(srelab(&["bogus"]).status.code(), Some(1));
    assert_eq!(srelab(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_seed_is_rejected() {
    assert_eq!(srelab(&["selftest", "--seed", "0xZZ"]).status.code(), Some(1));
}

#[test]
fn selftest_passes_quickly() {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let o = srelab(&["selftest", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(start.elapsed() < Duration::from_secs(60));
}

#[test]
fn failed_verdict_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "wlln.json",
        r#"{"source": "iid", "y": {"variant": "st_petersburg"}, "n_grid": [256, 1024],
            "reps": 20, "bootstrap": 100, "tolerance": 1e-9}"#,
    );
    let out = tmp.path().join("out");
    let o = srelab(&["wlln", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    assert!(out.join("report.json").exists());
}

#[test]
fn digests_do_not_depend_on_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let law = write(tmp.path(), "law.json", DISCRETE_LAW);
    let cfg = write(tmp.path(), "tm.json", r#"{"reps": 3000, "estimator": "both", "seed": "0x2a"}"#);
    let runs: Vec<(String, String)> = ["1", "4", "8"]
        .iter()
        .map(|t| {
            let out = tmp.path().join(format!("t{t}"));
            let o = srelab(&[
                "truncmoment", "--config", &cfg, "--law", &law, "--threads", t, "--out", out.to_str().unwrap(),
            ]);
            assert!(matches!(o.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&o.stderr));
            let digest = report(&out)["manifest"]["digest"].as_str().unwrap().to_owned();
            (digest, std::fs::read_to_string(out.join("curves.csv")).unwrap())
        })
        .collect();
    assert!(runs.iter().all(|r| *r == runs[0]));
}

#[test]
fn simulate_writes_path_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let law = write(tmp.path(), "law.json", DISCRETE_LAW);
    let cfg = write(tmp.path(), "sim.json", r#"{"n": 50, "garch_returns": true, "reps": 3}"#);
    let out = tmp.path().join("out");
    let o = srelab(&["simulate", "--config", &cfg, "--law", &law, "--seed", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(out.join("path.csv")).unwrap().lines().count();
    assert_eq!(rows, 51);
}
