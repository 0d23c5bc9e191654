use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn sptq(experiment: &str, config: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sptq-sim"))
        .arg(experiment)
        .arg("--config")
        .arg(config)
        .args(extra)
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn digest(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

#[test]
fn exact_pol_scan_follows_cos_squared() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, r#"{"imperfections": {"preset": "ideal"}}"#);
    let out = dir.path().join("out");
    let run = sptq("pol-scan", &config, &["--exact", "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let (header, rows) = read_csv(&out.join("pol-scan.csv"));
    assert_eq!(header, ["theta_deg", "m", "probability", "success_probability", "counts"]);
    assert_eq!(rows.len(), 19);
    for row in &rows {
        let theta: f64 = row[0].parse::<f64>().unwrap().to_radians();
        let p: f64 = row[2].parse().unwrap();
        assert!((p - theta.cos().powi(2) / 2.0).abs() < 1e-12, "{row:?}");
        assert!(row[4].is_empty());
    }

    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["config"]["exact"], true);
    assert!(result["seed"].is_null());
    assert_eq!(result["tool"], "sptq-sim");
}

#[test]
fn ideal_truth_table_is_a_permutation() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, r#"{"exact": true, "imperfections": {"preset": "ideal"}}"#);
    let out = dir.path().join("out");
    assert!(sptq("truth-table", &config, &["--out", out.to_str().unwrap()]).status.success());
    let (_, rows) = read_csv(&out.join("truth-table.csv"));
    assert_eq!(rows.len(), 16);
    let expected = [("00", "00"), ("01", "01"), ("10", "11"), ("11", "10")];
    for row in rows {
        let p: f64 = row[2].parse().unwrap();
        let hit = expected.contains(&(row[0].as_str(), row[1].as_str()));
        assert_eq!(p, if hit { 1.0 } else { 0.0 }, "{row:?}");
    }
}

#[test]
fn sampled_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, r#"{"imperfections": {"preset": "calibrated"}}"#);
    let mut seen = Vec::new();
    let out = dir.path().join("out");
    for seed in ["1", "1", "2"] {
        let r = sptq("ifo-scan", &config, &["--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        seen.push((digest(&out.join("ifo-scan.csv")), digest(&out.join("result.json"))));
    }
    assert_eq!(seen[0], seen[1]);
    assert_ne!(seen[0].0, seen[2].0);
}

#[test]
fn negative_integration_time_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, r#"{"counting": {"integration_time": -1.0}}"#);
    let r = sptq("pol-scan", &config, &["--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("counting.integration_time"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, r#"{"scan": {"theta_deg": {"start": 0, "stop": 90, "stpe": 5}}}"#);
    let r = sptq("pol-scan", &config, &[]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("scan.theta_deg"));
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = sptq("swap", &dir.path().join("absent.json"), &[]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, r#"{"exact": true}"#);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let r = sptq("swap", &config, &["--out", blocker.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn fully_absorbing_bench_is_an_experiment_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        &dir,
        r#"{"exact": true, "imperfections": {"preset": "ideal", "pbs_transmission_h": 0.0, "plate_transmission_v": 0.0}}"#,
    );
    let r = sptq("pol-scan", &config, &["--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn state_experiments_report_unit_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, r#"{"exact": true}"#);
    for name in ["swap", "ghz"] {
        let out = dir.path().join(name);
        assert!(sptq(name, &config, &["--out", out.to_str().unwrap()]).status.success());
        let result: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
        let f = result["result"]["fidelity"].as_f64().unwrap();
        assert!((f - 1.0).abs() < 1e-12);
        let (_, rows) = read_csv(&out.join(format!("{name}.csv")));
        assert_eq!(rows.len(), 16);
    }
}

#[test]
fn momentum_check_blocks_one_section() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, r#"{"exact": true}"#);
    let out = dir.path().join("out");
    assert!(sptq("momentum-check", &config, &["--out", out.to_str().unwrap()]).status.success());
    let (header, rows) = read_csv(&out.join("momentum-check.csv"));
    assert_eq!(header, ["blocked", "signal_section", "probability"]);
    assert_eq!(rows.len(), 6);
}
