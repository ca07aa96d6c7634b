use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sparse_hinf::cli::{read_csv, ActiveFlag};

const SMD: &str = r#"
kind = "smd-structured"
seed = 11
gamma = 1.0

[smd]
s_d = [1.0, 1.0, 1.0]
c0 = 0.01
c1 = 0.02
c2 = 0.03
"#;

const SMALL_PLANT: &str = r#"
kind = "structured"
seed = 5
gamma = 2.0

[plant]
a = { rows = 2, cols = 2, data = [-1.0, 1.0, 0.0, -2.0] }
b_d = { rows = 2, cols = 1, data = [1.0, 1.0] }
c_y = { rows = 2, cols = 2, data = [1.0, 0.0, 0.0, 1.0] }
d_d = { rows = 2, cols = 1, data = [0.0, 0.0] }
c_z = { rows = 2, cols = 2, data = [1.0, 0.0, 0.0, 1.0] }

[uncertainty]
m1 = { rows = 2, cols = 1, data = [0.1, 0.0] }
n1 = { rows = 1, cols = 2, data = [1.0, 0.0] }
m2 = { rows = 2, cols = 1, data = [0.0, 0.0] }
n2 = { rows = 1, cols = 1, data = [0.0] }
"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_sparse-hinf"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir)
        .arg("--quiet")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn design_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), SMD, &["design"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let first = fs::read(dir.path().join("design.json")).unwrap();
    let doc = json(&dir.path().join("design.json"));
    assert_eq!(doc["active_sensors"].as_array().unwrap().len(), 2);
    assert_eq!(doc["certification"]["kind"], "structured");

    assert_eq!(run(dir.path(), SMD, &["design"]).status.code(), Some(0));
    assert_eq!(fs::read(dir.path().join("design.json")).unwrap(), first);

    assert_eq!(run(dir.path(), SMD, &["verify"]).status.code(), Some(0));
    assert!(json(&dir.path().join("report.json")).is_object());

    let mut tampered = doc.clone();
    for x in tampered["gain"]["data"].as_array_mut().unwrap() {
        *x = Value::from(x.as_f64().unwrap() * 10.0);
    }
    let bad = dir.path().join("tampered.json");
    fs::write(&bad, serde_json::to_string(&tampered).unwrap()).unwrap();
    let out = run(dir.path(), SMD, &["verify", "--design", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn infeasible_level_reports_the_frontier() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMD.replace("gamma = 1.0", "gamma = 1e-9");
    assert_eq!(run(dir.path(), &cfg, &["design"]).status.code(), Some(2));
    let doc = json(&dir.path().join("design.json"));
    let f = doc["frontier"].as_f64().unwrap();
    assert!(f > 1e-9 && f < 0.25, "frontier {f}");
}

#[test]
fn zero_samples_checks_the_nominal_system_only() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), SMD, &["design", "--samples", "0"]).status.code(), Some(0));
    let cert = &json(&dir.path().join("design.json"))["certification"];
    assert_eq!(cert["sampled"]["n_samples"], 0);
    assert_eq!(cert["sampled"]["worst_norm"], cert["sampled"]["nominal_norm"]);
}

#[test]
fn user_plants_are_accepted_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), SMALL_PLANT, &["design"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mismatched = SMALL_PLANT.replace("b_d = { rows = 2, cols = 1", "b_d = { rows = 1, cols = 2");
    let out = run(dir.path(), &mismatched, &["design"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn uncertainty_sweep_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{}\n[sweep]\nparam = \"c0\"\nvalues = [0.0, 0.1]\n",
        SMD.replace("c0 = 0.01", "c0 = 0.0").replace("c1 = 0.02", "c1 = 0.0").replace("c2 = 0.03", "c2 = 0.0")
    );
    let out = run(dir.path(), &cfg, &["sweep", "--samples", "20"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv_path = dir.path().join("sweep.csv");
    let text = fs::read_to_string(&csv_path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "sweep_param,sweep_value,sensor_index,active,beta,certified,worst_norm");
    let rows = read_csv(&csv_path).unwrap();
    assert_eq!(rows.len(), 12);
    let active_at = |c0: f64| rows.iter().filter(|r| r.sweep_value == c0 && r.active == ActiveFlag::Active).count();
    assert_eq!(active_at(0.0), 1);
    assert_eq!(active_at(0.1), 2);
    assert!(rows.iter().all(|r| r.certified));
    assert_eq!(json(&dir.path().join("sweep.json")).as_array().unwrap().len(), 2);
}

#[test]
fn usage_errors_exit_with_one() {
    let status = Command::new(env!("CARGO_BIN_EXE_sparse-hinf")).arg("frobnicate").output().unwrap().status;
    assert_eq!(status.code(), Some(1));
}
