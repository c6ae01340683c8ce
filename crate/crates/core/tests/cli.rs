use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str], config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_exit-transport"));
    cmd.args(args).arg("--out").arg(dir);
    if let Some(text) = config {
        let path = dir.join("config.json");
        fs::create_dir_all(dir).unwrap();
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn body(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn threshold_outputs_and_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["threshold"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("threshold_f.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with(&format!("# exit-transport {}", exit_transport::VERSION)));
    let cfg: Value = serde_json::from_str(lines.next().unwrap().strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(cfg["command"], "threshold");
    assert_eq!(cfg["seed"], 7);
    assert_eq!(lines.next().unwrap(), "rho,F(rho)");
    assert_eq!(lines.count(), 99);

    let doc = json(&dir.path().join("threshold.json"));
    assert_eq!(doc["version"], exit_transport::VERSION);
    let text = doc["data"].to_string();
    assert!(text.contains("12.538"), "{text}");
}

#[test]
fn threshold_without_crossing_is_a_tolerance_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["threshold"], Some(r#"{"rho_grid": [1, 2, 3]}"#));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_configs_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, cfg) in [
        ("threshold", r#"{"unknown_key": 1}"#),
        ("match", r#"{"n": 6000}"#),
        ("match", r#"{"domain_a": {"type": "disc", "center": {"re": 3, "im": 0}, "radius": 1}}"#),
        ("disc-exact", r#"{"p": [1.5]}"#),
        ("scaled-scan", r#"{"p": 3}"#),
        ("norm", "not json"),
    ] {
        let out = run(&dir.path().join(cmd), &[cmd], Some(cfg));
        assert_eq!(out.status.code(), Some(2), "{cmd} {cfg}");
    }
    let out = run(dir.path(), &["no-such-command"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = r#"{"n": 150, "step": 1e-3}"#;
    let one = tempfile::tempdir().unwrap();
    let two = tempfile::tempdir().unwrap();
    for dir in [&one, &two] {
        let out = run(dir.path(), &["match", "--seed", "3"], Some(cfg));
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for stem in ["exits_a", "exits_b", "matching_min", "matching_max", "paths_min", "paths_max"] {
        let file = format!("{stem}.csv");
        assert_eq!(body(&one.path().join(&file)), body(&two.path().join(&file)), "{file}");
    }
    let exits = body(&one.path().join("exits_a.csv"));
    assert_eq!(exits.lines().next().unwrap(), "index,re,im,time");
    assert_eq!(exits.lines().count(), 151);
    let summary = json(&one.path().join("match_summary.json"));
    assert!(summary["data"]["lambda_hat"].as_f64().unwrap() <= summary["data"]["phi_hat"].as_f64().unwrap());
}

#[test]
fn matching_a_sample_with_itself_costs_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "domain_a": {"type": "disc", "center": {"re": 0, "im": 0}, "radius": 1},
        "domain_b": {"type": "disc", "center": {"re": 0, "im": 0}, "radius": 1},
        "n": 100, "step": 1e-3, "seed_b": 5
    }"#;
    let out = run(dir.path(), &["match", "--seed", "5"], Some(cfg));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&dir.path().join("match_summary.json"));
    assert_eq!(summary["data"]["lambda_hat"].as_f64(), Some(0.0));
    let matching = body(&dir.path().join("matching_min.csv"));
    let rows: Vec<&str> = matching.lines().skip(1).collect();
    assert_eq!(rows.len(), 100);
    for (i, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!((cols[0], cols[1]), (i.to_string().as_str(), i.to_string().as_str()));
    }
}

#[test]
fn scaled_scan_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["scaled-scan"], Some(r#"{"lambda_grid": [1, 2]}"#));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = body(&dir.path().join("scaled_scan.csv"));
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    let r = &rows[1];
    assert_eq!(r[0], 2.0);
    assert!((r[1] - 2.5f64.sqrt()).abs() < 1e-3);
    assert!((r[2] - 4.5f64.sqrt()).abs() < 1e-12);
    assert!(r[3] <= r[5] && r[5] <= r[4]);
}

#[test]
fn disc_exact_and_verify_subset() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["disc-exact"], Some(r#"{"p": [2], "lambda_grid": [1, 2]}"#));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(body(&dir.path().join("disc_exact.csv")).lines().count(), 3);

    let json_only = dir.path().join("json_only");
    let out = run(&json_only, &["disc-exact", "--format", "json"], Some(r#"{"p": [2], "lambda_grid": [1]}"#));
    assert_eq!(out.status.code(), Some(0));
    assert!(json_only.join("disc_exact.json").exists());
    assert!(!json_only.join("disc_exact.csv").exists());

    let out = run(dir.path(), &["verify"], Some(r#"{"checks": [1, 5, 8]}"#));
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 3, "{stdout}");
}
