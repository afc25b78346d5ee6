use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use detstab_core::limits::{ConvergenceReport, Verdict};
use tempfile::TempDir;

const MAJDA: &str =
    r#"{"model": {"kind": "majda", "q": 0.3, "k": 1.0, "u_ig": 0.5, "activation": 1.0, "b": 1.0, "c": 1.0}}"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_detstab"));
    c.env_remove("DETSTAB_CONFIG").env_remove("DETSTAB_OUT").env_remove("DETSTAB_EPS");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn parse_rows(csv: &str) -> Vec<[f64; 5]> {
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "re_lambda,im_lambda,re_D,im_D,log_scale");
    lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|t| t.parse().unwrap()).collect();
            [v[0], v[1], v[2], v[3], v[4]]
        })
        .collect()
}

#[test]
fn profile_reports_small_conserved_drift() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", MAJDA);
    let out = dir.path().join("znd.json");
    let o = run(&["profile", "--config", cfg.to_str().unwrap(), "--kind", "znd", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let drift: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("conserved_drift: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(drift <= 1e-8);
    let cached = detstab_core::profile::ProfileCache::load(&out).unwrap();
    assert_eq!(cached.header.kind, "znd");
}

#[test]
fn missing_burned_state_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", &MAJDA.replace("\"q\": 0.3", "\"q\": 0.6"));
    let out = dir.path().join("znd.json");
    let o = run(&["profile", "--config", cfg.to_str().unwrap(), "--kind", "znd", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("NoBurnedState"));
}

#[test]
fn missing_config_and_bad_arguments_are_usage_errors() {
    let o = run(&["profile", "--config", "/nonexistent/cfg.json", "--kind", "znd", "--out", "/tmp/x.json"]);
    assert_eq!(code(&o), 2);
    let o = run(&["profile", "--kind", "znd"]);
    assert_eq!(code(&o), 2);
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"model": {"kind": "majda"}, "oops": 1}"#);
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn znd_determinant_vanishes_at_origin() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", MAJDA);
    let c = cfg.to_str().unwrap();
    let at0 = parse_rows(&stdout(&run(&["evans", "--config", c, "--kind", "znd", "--lambda", "0,0"])));
    let ring = parse_rows(&stdout(&run(&[
        "evans", "--config", c, "--kind", "znd", "--circle", "0.1", "--count", "16",
    ])));
    assert_eq!(at0.len(), 1);
    let reference = ring.iter().map(|r| r[4]).fold(f64::MIN, f64::max);
    let scale = ring
        .iter()
        .map(|r| r[2].hypot(r[3]) * (r[4] - reference).exp())
        .fold(0.0, f64::max);
    let d0 = at0[0][2].hypot(at0[0][3]) * (at0[0][4] - reference).exp();
    assert!(d0 <= 1e-6 * scale, "{d0} vs {scale}");
}

#[test]
fn circle_tables_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", MAJDA);
    let args = |name: &str| {
        vec![
            "evans".to_string(),
            "--config".into(),
            cfg.to_str().unwrap().into(),
            "--kind".into(),
            "znd".into(),
            "--circle".into(),
            "1".into(),
            "--out".into(),
            dir.path().join(name).to_str().unwrap().into(),
        ]
    };
    assert_eq!(bin().args(args("a.csv")).status().unwrap().code(), Some(0));
    assert_eq!(bin().args(args("b.csv")).status().unwrap().code(), Some(0));
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(parse_rows(&String::from_utf8(a).unwrap()).len(), 64);
}

#[test]
fn seeded_random_points_repeat() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", MAJDA);
    let c = cfg.to_str().unwrap();
    let go = |seed: &str| stdout(&run(&["evans", "--config", c, "--kind", "ns", "--random", "3", "--seed", seed]));
    assert_eq!(go("7"), go("7"));
    assert_ne!(go("7"), go("8"));
}

#[test]
fn open_contour_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", MAJDA);
    let contour = write(
        dir.path(),
        "open.json",
        r#"{"segments": [{"type": "line", "from": [1, 0], "to": [0, 1]}, {"type": "line", "from": [0, 1], "to": [-1, 0]}]}"#,
    );
    let o = run(&[
        "evans", "--config", cfg.to_str().unwrap(), "--kind", "znd", "--contour", contour.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    let o = run(&[
        "winding", "--config", cfg.to_str().unwrap(), "--kind", "znd", "--contour", contour.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn winding_counts_translational_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", MAJDA);
    let o = run(&["winding", "--config", cfg.to_str().unwrap(), "--kind", "znd", "--circle", "0.05"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["winding"], 1);
}

#[test]
fn validate_passes_on_majda() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", MAJDA);
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pass"], true);
}

#[test]
fn unwritable_output_dir_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", MAJDA);
    let blocker = write(dir.path(), "file", "");
    let out = blocker.join("sub");
    let o = run(&["study", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn region_three_only_and_cache_reuse() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", MAJDA);
    let out = dir.path().join("run");
    let args = [
        "study",
        "--config",
        cfg.to_str().unwrap(),
        "--regions",
        "3",
        "--eps",
        "0.1",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(code(&run(&args)), 0);
    assert!(out.join("region3.csv").exists());
    assert!(!out.join("region1.csv").exists());
    assert!(!out.join("region2.csv").exists());
    let svg = std::fs::read_to_string(out.join("zeros.svg")).unwrap();
    assert!(svg.contains("Region III") && !svg.contains(">Region I<") && !svg.contains("Region II "));

    let bundle: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("bundle.json")).unwrap()).unwrap();
    assert_eq!(bundle["profiles_from_cache"], false);
    for key in ["files", "profiles"] {
        for f in bundle[key].as_array().unwrap() {
            assert!(out.join(f.as_str().unwrap()).exists(), "{f}");
        }
    }
    let text = std::fs::read_to_string(out.join("report.json")).unwrap();
    let report: ConvergenceReport = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", text);
    assert_eq!(report.verdict, Verdict::Stable);
    assert!(report.region1.is_none() && report.region2.is_none());

    assert_eq!(code(&run(&args)), 0);
    let again: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("bundle.json")).unwrap()).unwrap();
    assert_eq!(again["profiles_from_cache"], true);
    assert_eq!(std::fs::read_to_string(out.join("report.json")).unwrap(), text);
}

#[test]
fn full_majda_study_is_stable() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", MAJDA);
    let out = dir.path().join("run");
    let o = run(&["study", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("verdict: STABLE"));
    for f in ["region1.csv", "region2.csv", "region3.csv", "zeros.svg", "report.json"] {
        assert!(out.join(f).exists());
    }
}
