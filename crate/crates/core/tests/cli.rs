use std::path::Path;
use std::process::{Command, Output};

fn kpv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpv")).args(args).output().expect("spawn kpv")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const TWO_DISKS: &str = r#"{"dimension":2,"points":[[0,0],[1,0]]}"#;

fn lens_area(d: f64, r: f64) -> f64 {
    2.0 * r * r * (d / (2.0 * r)).acos() - 0.5 * d * (4.0 * r * r - d * d).sqrt()
}

#[test]
fn volume_report_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "two.json", TWO_DISKS);
    let out = kpv(&["volume", "--config", &cfg, "--r", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let row = &report["result"][0];
    let lens = lens_area(1.0, 1.0);
    let union = row["union_volume"].as_f64().unwrap();
    let inter = row["intersection_volume"].as_f64().unwrap();
    assert!((inter - lens).abs() < 1e-9 * lens, "{inter} vs {lens}");
    assert!((union - (2.0 * std::f64::consts::PI - lens)).abs() < 1e-9 * union);
    assert_eq!(report["parameters"]["method"], "voronoi_ode");
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "two.json", TWO_DISKS);
    let args = ["volume", "--config", cfg.as_str(), "--method", "monte-carlo", "--samples", "20000", "--seed", "9", "--r-grid", "0.5:3:4"];
    let a = kpv(&args);
    let b = kpv(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn csv_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "two.json", TWO_DISKS);
    let json = kpv(&["boundary", "--config", &cfg, "--r", "2"]);
    let csv = kpv(&["boundary", "--config", &cfg, "--r", "2", "--format", "csv"]);
    let report: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    let text = String::from_utf8(csv.stdout).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let values: Vec<&str> = lines.next().unwrap().split(',').collect();
    for (h, v) in header.iter().zip(values) {
        let j = report["result"][0][*h].as_f64().unwrap();
        assert_eq!(v.parse::<f64>().unwrap(), j, "column {h}");
    }
}

#[test]
fn malformed_input_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"dimension":2,"points":[[0,0],[1]]}"#);
    let out_path = dir.path().join("report.json");
    let out = kpv(&["volume", "--config", &cfg, "--r", "1", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_path.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);

    let dup = write(dir.path(), "dup.json", r#"{"dimension":2,"points":[[0,0],[0,0]]}"#);
    assert_eq!(kpv(&["volume", "--config", &dup, "--r", "1"]).status.code(), Some(2));
    assert_eq!(kpv(&["volume", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(kpv(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn out_file_is_written_whole() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "two.json", TWO_DISKS);
    let out_path = dir.path().join("mw.json");
    let out = kpv(&["meanwidth", "--config", &cfg, "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&out_path).unwrap()).unwrap();
    assert_eq!(report["result"][0]["mean_width"].as_f64().unwrap(), 2.0);
}

#[test]
fn generate_then_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tri.json", r#"{"dimension":2,"points":[[0,0],[1,0],[0.3,0.9]]}"#);
    let prefix = dir.path().join("pair");
    let g = kpv(&["generate", "--config", &cfg, "--seed", "4", "--magnitude", "0.3", "--out", prefix.to_str().unwrap()]);
    assert_eq!(g.status.code(), Some(0));
    let p = dir.path().join("pair.p.json");
    let q = dir.path().join("pair.q.json");
    let out = kpv(&["threshold", "--config", p.to_str().unwrap(), "--config", q.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["result"]["all_hold"], true);
}

#[test]
fn generate_with_zero_magnitude_copies_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tri.json", r#"{"dimension":2,"points":[[0,0],[1,0],[0.3,0.9]]}"#);
    let prefix = dir.path().join("same");
    assert_eq!(kpv(&["generate", "--config", &cfg, "--magnitude", "0", "--out", prefix.to_str().unwrap()]).status.code(), Some(0));
    let p: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("same.p.json")).unwrap()).unwrap();
    let q: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("same.q.json")).unwrap()).unwrap();
    assert_eq!(p["points"], q["points"]);
}

#[test]
fn failed_verification_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "two.json", TWO_DISKS);
    let out = kpv(&["verify", "csikos", "--config", &cfg, "--tol", "1e-14"]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], false);
}

#[test]
fn ww_lemma_from_polyhedral_config() {
    let dir = tempfile::tempdir().unwrap();
    let set = write(
        dir.path(),
        "wedge.json",
        r#"{"dimension":2,"halfspaces":[{"normal":[1,0],"offset":1},{"normal":[0,1],"offset":0.5}]}"#,
    );
    let out = kpv(&["verify", "ww-lemma", "--config", &set, "--p0", "0.1,0.2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}
