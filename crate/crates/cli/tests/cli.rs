use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn ybcav(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ybcav"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn summary(dir: &Path, name: &str) -> Value {
    let text = fs::read_to_string(dir.join(format!("{name}.summary.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn lifetime_on_strong_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset("strong_ion.json");
    let out = ybcav(&["lifetime", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path(), "lifetime");
    let tau = s["results"]["tau_fit"].as_f64().unwrap();
    assert!((tau / 4.2e-6 - 1.0).abs() < 0.01, "{tau}");
    assert_eq!(s["subcommand"], "lifetime");
    assert_eq!(s["inputs_sha256"].as_str().unwrap().len(), 64);
    let csv = fs::read_to_string(dir.path().join("lifetime.csv")).unwrap();
    assert!(csv.starts_with("delay_s,counts,err\n"));
}

#[test]
fn control_preset_lifetime() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset("control_ion.json");
    let out = ybcav(&["lifetime", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let tau = summary(dir.path(), "lifetime")["results"]["tau_fit"].as_f64().unwrap();
    assert!((tau / 41e-6 - 1.0).abs() < 0.01, "{tau}");
}

#[test]
fn purcell_summary() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ybcav(&["purcell"], dir.path()).status.success());
    let r = &summary(dir.path(), "purcell")["results"];
    assert!((r["f_max"].as_f64().unwrap() - 236.9).abs() < 0.1);
    assert!((r["site_reduction"].as_f64().unwrap() - 64.0).abs() < 1e-6);
}

#[test]
fn audit_marks_overrides() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ybcav(&["bragg", "--seed", "99"], dir.path()).status.success());
    let s = summary(dir.path(), "bragg");
    assert_eq!(s["master_seed"], 99);
    let audit = s["audit"].as_array().unwrap();
    let seed = audit.iter().find(|a| a["field"] == "master_seed").unwrap();
    assert_eq!(seed["source"], "user");
    assert!(audit.iter().any(|a| a["source"] == "placeholder"));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"levels": {"branch_a": 1.2}}"#).unwrap();
    let out = ybcav(&["lifetime", "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("branch_a"));

    fs::write(&cfg, "{\n  \"master_seed\": 1,\n  oops\n}").unwrap();
    let out = ybcav(&["lifetime", "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = ybcav(&["g2", "--shots", "1"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("photon-stats"));
}

#[test]
fn shots_conflicts_with_paper_scale() {
    let dir = tempfile::tempdir().unwrap();
    let out = ybcav(&["g2", "--shots", "10", "--paper-scale"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let read = |name: &str| fs::read(dir.path().join(name)).unwrap();
    let mut first = Vec::new();
    for round in 0..2 {
        assert!(ybcav(&["lifetimes", "--seed", "3"], dir.path()).status.success());
        let files = ["lifetimes.csv", "lifetimes_hist.csv", "lifetimes.summary.json"].map(read);
        if round == 0 {
            first = files.to_vec();
        } else {
            assert_eq!(first, files.to_vec());
        }
    }
}
