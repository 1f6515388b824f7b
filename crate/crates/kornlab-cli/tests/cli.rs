use std::path::Path;
use std::process::{Command, Output};

fn kornlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kornlab")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8")
}

/// Data rows of a CSV report, skipping the header comments and column line.
fn rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().expect("number")).collect())
        .collect()
}

fn assert_row(row: &[f64], expected: &[f64]) {
    assert_eq!(row.len(), expected.len());
    for (a, b) in row.iter().zip(expected) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{row:?} vs {expected:?}");
    }
}

#[test]
fn bounds_rows() {
    let out = kornlab(&["bounds", "--p-grid", "2,4"]);
    assert_eq!(out.status.code(), Some(0));
    let r = rows(&stdout(&out));
    let s3 = 3f64.sqrt();
    assert_row(&r[0], &[2.0, 1.0, 1.0, s3, 1.0, 2f64.sqrt(), 2.0]);
    assert_row(&r[1], &[4.0, 1.5, 3.0, 3.0 * s3, 3.0, 10f64.sqrt(), 28f64.sqrt()]);
}

#[test]
fn bounds_duality() {
    let r = rows(&stdout(&kornlab(&["bounds", "--p-grid", "3,1.5"])));
    // Columns 1..=5 depend on p only through p*.
    for c in 1..=5 {
        assert!((r[0][c] - r[1][c]).abs() <= 1e-12 * r[0][c], "column {c}");
    }
}

#[test]
fn header_embeds_version_config_and_seed() {
    let text = stdout(&kornlab(&["bounds", "--p", "3", "--seed", "11"]));
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# kornlab "));
    let config = lines.next().unwrap().strip_prefix("# config: ").unwrap();
    let v: serde_json::Value = serde_json::from_str(config).unwrap();
    assert_eq!(v["command"], "bounds");
    assert_eq!(lines.next().unwrap(), "# seed: 11");
}

#[test]
fn json_output_parses() {
    let out = kornlab(&["tensor-constants", "--format", "json", "--d", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let row = v["rows"][0].as_array().unwrap();
    assert_eq!(row[0], 3);
    assert!((row[1].as_f64().unwrap() + 0.5).abs() < 1e-10);
    assert!((row[4].as_f64().unwrap() - 3.0).abs() < 1e-8);
}

#[test]
fn exit_codes() {
    assert_eq!(kornlab(&["bounds", "--p", "0.5"]).status.code(), Some(2));
    assert_eq!(kornlab(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(kornlab(&["--help"]).status.code(), Some(0));
    assert_eq!(kornlab(&["radial", "--p", "1.5"]).status.code(), Some(2));
    let missing = kornlab(&["orlicz", "--family", "table", "--table", "/nonexistent/phi.csv"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/phi.csv"));
}

#[test]
fn verify_passes_and_negation_fails() {
    let ok = kornlab(&["verify"]);
    assert_eq!(ok.status.code(), Some(0));
    let text = stdout(&ok);
    let checks: Vec<&str> = text.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).collect();
    assert!(checks.len() >= 20 && checks.iter().all(|l| l.starts_with("PASS")));
    let bad = kornlab(&["verify", "--self-test-negate"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).lines().any(|l| l.starts_with("FAIL gamma_identity")));
}

fn figure(dir: &Path, name: &str) -> Vec<Vec<f64>> {
    rows(&std::fs::read_to_string(dir.join(name)).unwrap())
}

#[test]
fn figure_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = kornlab(&["figures", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    for r in figure(dir.path(), "riesz_bounds.csv") {
        let q = r[0].max(r[0] / (r[0] - 1.0)) - 1.0;
        assert_row(&r, &[r[0], 1f64.max(q / 2.0), q]);
    }
    let imp = figure(dir.path(), "improvement.csv");
    let gains: Vec<f64> = imp.iter().map(|r| r[3]).collect();
    let interior = &gains[1..gains.len() - 1];
    assert!(interior.iter().all(|&g| g > 0.0 && g <= 5e-4));
    assert!(gains[0].abs() <= 1e-5 && gains[gains.len() - 1].abs() <= 1e-5, "{} {}", gains[0], gains[gains.len() - 1]);
}

#[test]
fn orlicz_table_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phi.csv");
    let mut text = String::from("t,phi,dphi\n");
    for i in -40..=40 {
        let t = 10f64.powf(f64::from(i) / 10.0);
        text.push_str(&format!("{t},{},{}\n", t.powi(3), 3.0 * t * t));
    }
    std::fs::write(&path, text).unwrap();
    let out = kornlab(&["orlicz", "--family", "table", "--table", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let line = stdout(&out).lines().last().unwrap().to_string();
    let cells: Vec<&str> = line.split(',').collect();
    assert_eq!(cells[0], "table");
    let lower: f64 = cells[2].parse().unwrap();
    let upper: f64 = cells[3].parse().unwrap();
    assert!((lower - 3.0).abs() < 1e-9 && (upper - 3.0).abs() < 1e-9);
}

#[test]
fn spectral_check_reports_small_residuals() {
    let r = rows(&stdout(&kornlab(&["spectral-check", "--n", "16", "--p-grid", "2,4"])));
    assert_eq!(r.len(), 10);
    for row in r {
        assert!(row[2] <= row[4] + 1e-9);
        assert!(row[5] <= 1e-10 && row[6] <= 1e-10);
    }
}
