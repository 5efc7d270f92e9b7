use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use diracres::fixtures;
use diracres::plane::Rect;
use diracres::states::{winding_of_f, FinderOptions};
use tempfile::TempDir;

fn run(args: &[&str], config: &str, dir: &Path) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_diracres"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn free_operator_has_one_virtual_state() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["states"],
        r#"{"potential": {"fixture": "free"}, "region": {"re_min": -3, "re_max": 3, "im_min": -2, "im_max": 1}}"#,
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("out/states.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][4], "virtual");
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), -1.0);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/states.json")).unwrap()).unwrap();
    assert_eq!(json["summary"]["virtual"], 1);
    assert_eq!(json["metadata"]["potential_hash"], fixtures::free().content_hash());
}

#[test]
fn state_rows_match_the_winding_number() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["states"],
        r#"{"potential": {"fixture": "step_q"}, "format": "csv",
            "region": {"re_min": -40, "re_max": 40, "im_min": -8, "im_max": 0.5}}"#,
        dir.path(),
    );
    assert!(out.status.success());
    assert!(!dir.path().join("out/states.json").exists());
    let rows = csv_rows(&dir.path().join("out/states.csv"));
    let total: i64 = rows.iter().map(|r| r[5].parse::<i64>().unwrap()).sum();
    let rect = Rect::new(-40.0, 40.0, -8.0, 0.5).unwrap();
    let winding = winding_of_f(&fixtures::step_q(), &rect, &FinderOptions::default()).unwrap();
    assert_eq!(total, winding);
    assert!(rows.len() > 20);
}

#[test]
fn potential_file_is_resolved_next_to_the_config() {
    let dir = TempDir::new().unwrap();
    let spec = serde_json::to_string(&fixtures::smooth_bump().spec()).unwrap();
    fs::write(dir.path().join("bump.json"), spec).unwrap();
    let out = run(&["scattering"], r#"{"potential": "bump.json", "ranges": [{"from": 1.5, "to": 20, "count": 40}]}"#, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("out/scattering.csv"));
    assert_eq!(rows.len(), 40);
    for r in &rows {
        let (re, im): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!((re.hypot(im) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn malformed_potential_exits_with_2() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"m": 1, "gamma": "#).unwrap();
    let out = run(&["states"], r#"{"potential": "bad.json", "region": {"re_min": -1, "re_max": 1, "im_min": -1, "im_max": 1}}"#, dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = run(
        &["states"],
        r#"{"potential": {"m": 1, "gamma": 1, "segments": [{"lo": 0, "hi": 3, "q": [1]}]},
            "region": {"re_min": -1, "re_max": 1, "im_min": -1, "im_max": 1}}"#,
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_exits_with_2() {
    let dir = TempDir::new().unwrap();
    for cfg in [
        r#"{"potential": {"fixture": "free"}, "region": {"re_min": 1, "re_max": -1, "im_min": -1, "im_max": 1}}"#,
        r#"{"potential": {"fixture": "free"}, "tolerance": -1}"#,
        r#"{"potential": {"fixture": "nonesuch"}, "radii": [1]}"#,
        r#"{"potential": {"fixture": "free"}, "unknown_field": 1}"#,
    ] {
        assert_eq!(run(&["counting"], cfg, dir.path()).status.code(), Some(2), "{cfg}");
    }
}

#[test]
fn free_operator_counts_nothing() {
    let dir = TempDir::new().unwrap();
    let out = run(&["counting"], r#"{"potential": {"fixture": "free"}, "radii": [10, 20, 40]}"#, dir.path());
    assert!(out.status.success());
    for r in csv_rows(&dir.path().join("out/counting.csv")) {
        assert_eq!(r[1], "0");
        assert_eq!(r[4], "0");
    }
}

#[test]
fn det_margins_along_a_horizontal_line_are_unimodal() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["det"],
        r#"{"potential": {"fixture": "step_q"}, "segments": [{"from": [-5, 2], "to": [5, 2], "count": 21}]}"#,
        dir.path(),
    );
    assert!(out.status.success());
    let margins: Vec<f64> = csv_rows(&dir.path().join("out/det.csv")).iter().map(|r| r[6].parse().unwrap()).collect();
    assert!(margins.iter().all(|&m| m > 0.0));
    let low = margins.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!(margins[..=low].windows(2).all(|w| w[1] < w[0]));
    assert!(margins[low..].windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let cfg = r#"{"potential": {"fixture": "smooth_q"},
        "region": {"re_min": -20, "re_max": 20, "im_min": -6, "im_max": 0.5}}"#;
    let det = r#"{"potential": {"fixture": "smooth_q"}, "points": [[1, 1], [-2, 0.5], [3, -1]], "nodes": 64}"#;
    let mut files = Vec::new();
    for threads in ["1", "4"] {
        let dir = TempDir::new().unwrap();
        assert!(run(&["states", "--threads", threads], cfg, dir.path()).status.success());
        let states = fs::read(dir.path().join("out/states.json")).unwrap();
        assert!(run(&["det", "--threads", threads], det, dir.path()).status.success());
        files.push((states, fs::read(dir.path().join("out/det.csv")).unwrap()));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn verify_exit_code_follows_the_verdicts() {
    let dir = TempDir::new().unwrap();
    let out = run(&["verify"], r#"{"criteria": [1, 14]}"#, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/verify.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], 2);
    assert_eq!(json["verdicts"][0]["id"], 1);
    assert_eq!(json["metadata"]["potential_hash"], fixtures::step_q().content_hash());

    // the stated closed form of the relativistic integral is off by a factor 2
    let out = run(&["verify"], r#"{"criteria": [13]}"#, dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL] criterion 13"));

    assert_eq!(run(&["verify"], r#"{"criteria": [15]}"#, dir.path()).status.code(), Some(2));
}
