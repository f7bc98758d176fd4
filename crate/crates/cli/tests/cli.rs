use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mixop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_config(dir: &Path, name: &str, json: &str, extra: &[&str]) -> (Output, std::path::PathBuf) {
    let cfg = dir.join(format!("{name}.json"));
    fs::write(&cfg, json).unwrap();
    let out = dir.join(name);
    let mut args = vec!["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    (mixop(&args), out)
}

fn summary(out: &Path) -> Value {
    serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap()
}

const SOLVE: &str = r#"{
    "kind": "solve", "seed": 9,
    "domain": {"shape": "ball", "center": [0, 0], "radius": 1},
    "f": "1", "g": "0", "points": [[0, 0], [0.5, 0]],
    "n_paths": 4000, "dt": 0.001, "t_max": 5
}"#;

#[test]
fn empty_config_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = run_config(dir.path(), "empty", "{}", &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing field `kind`"), "{err}");
}

#[test]
fn kernel_validation_reports_integrability() {
    let dir = tempfile::tempdir().unwrap();
    let json = r#"{"kind": "validate-kernel", "dimension": 1, "kernel": {"family": "fractional", "s": 0.5}}"#;
    let (out, dest) = run_config(dir.path(), "vk", json, &["--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let s = summary(&dest);
    let value = s["results"]["integrability"]["value"].as_f64().unwrap();
    assert!((value - 4.0).abs() < 1e-6, "{value}");
    assert_eq!(s["verdicts"]["symbol_sector"], Value::Bool(true));
    let sym = &s["results"]["symbol"][1];
    assert!((sym["re"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-9);
}

#[test]
fn theorem_hypothesis_violation_names_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let json = r#"{"kind": "faber-krahn",
        "kernel": {"family": "tabulated", "radii": [0.1, 0.5, 2.0], "values": [0.1, 1.0, 0.1]},
        "domain": {"shape": "ball", "center": [0, 0], "radius": 1}, "n_paths": 10}"#;
    let (out, _) = run_config(dir.path(), "fk", json, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("radially_decreasing"));
}

#[test]
fn failed_verdict_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let json = SOLVE.replace("\"seed\": 9,", "\"seed\": 9, \"expected\": 0.9,");
    let (out, dest) = run_config(dir.path(), "bad", &json, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(summary(&dest)["pass"], Value::Bool(false));
}

#[test]
fn estimation_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let json = r#"{"kind": "eigen", "domain": {"shape": "interval", "a": -1, "b": 1},
        "n_paths": 200, "dt": 0.001, "t_max": 0.05}"#;
    let (out, _) = run_config(dir.path(), "short", json, &[]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_expression_reports_its_column() {
    let dir = tempfile::tempdir().unwrap();
    let json = SOLVE.replace("\"f\": \"1\"", "\"f\": \"1 + sin(x1\"");
    let (out, _) = run_config(dir.path(), "expr", &json, &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("field `f`") && err.contains("column 11"),
        "{err}"
    );
}

#[test]
fn reruns_are_byte_identical_and_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let (a, da) = run_config(dir.path(), "a", SOLVE, &["--quiet"]);
    let (b, db) = run_config(dir.path(), "b", SOLVE, &["--quiet"]);
    assert!(a.status.success() && b.status.success());
    let s = summary(&da);
    let hash = s["provenance"]["config_sha256"]
        .as_str()
        .unwrap()
        .to_string();
    assert_eq!(hash.len(), 64);
    assert_eq!(s["provenance"]["seed"], 9);
    for name in ["solve.csv", "summary.json"] {
        assert_eq!(
            fs::read(da.join(name)).unwrap(),
            fs::read(db.join(name)).unwrap(),
            "{name}"
        );
    }
    let csv = fs::read_to_string(da.join("solve.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        format!("# config_sha256={hash} seed=9")
    );
    assert_eq!(csv.lines().count(), 4);

    let (c, dc) = run_config(dir.path(), "c", SOLVE, &["--quiet", "--seed", "10"]);
    assert!(c.status.success());
    assert_eq!(summary(&dc)["provenance"]["seed"], 10);
    assert_ne!(
        fs::read(da.join("solve.csv")).unwrap(),
        fs::read(dc.join("solve.csv")).unwrap()
    );
}

#[test]
fn validate_and_listing_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solve.json");
    fs::write(&cfg, SOLVE).unwrap();
    let out = mixop(&["validate", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("kind solve in dimension 2"));
    let kernels = String::from_utf8_lossy(&mixop(&["list-kernels"]).stdout).into_owned();
    assert!(kernels.contains("tempered-fractional"));
    let domains = String::from_utf8_lossy(&mixop(&["list-domains"]).stdout).into_owned();
    assert!(domains.contains("polytope") && domains.contains("cross-validate"));
    assert_eq!(mixop(&["run"]).status.code(), Some(2));
    assert_eq!(
        mixop(&["run", "/nonexistent/config.json"]).status.code(),
        Some(2)
    );
}

#[test]
fn narrow_domain_run_finds_a_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let json = r#"{"kind": "narrow-domain", "dimension": 1, "c": 4,
        "widths": [0.5, 1.0, 1.4, 1.8, 2.2], "h": 0.01}"#;
    let (out, dest) = run_config(dir.path(), "narrow", json, &["--quiet"]);
    assert!(out.status.success());
    let t = summary(&dest)["results"]["narrow"]["threshold"]
        .as_f64()
        .unwrap();
    assert!((t - 1.4).abs() < 1e-12, "{t}");
}

#[test]
fn solve_with_p_reports_the_abp_ratio() {
    let dir = tempfile::tempdir().unwrap();
    // u'' = -1 on (-1, 1): sup u = 1/2 and ‖1‖_{L²} = √2.
    let json = r#"{"kind": "solve", "seed": 4, "domain": {"shape": "interval", "a": -1, "b": 1},
        "f": "1", "g": "0", "p": 2, "lattice": 9, "n_paths": 4000, "t_max": 20}"#;
    let (out, dest) = run_config(dir.path(), "abp", json, &["--quiet"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let abp = &summary(&dest)["results"]["abp"];
    let norm = abp["lp_norm_f"].as_f64().unwrap();
    assert!((norm - 2f64.sqrt()).abs() < 1e-9, "{norm}");
    let ratio = abp["ratio"].as_f64().unwrap();
    assert!((ratio - 0.5 / 2f64.sqrt()).abs() < 0.03, "{ratio}");
    assert!(dest.join("abp.csv").exists());

    let low = json.replace("\"p\": 2", "\"p\": 0.4");
    let (out, _) = run_config(dir.path(), "abp_low", &low, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p > d/2"));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let out = mixop(&["validate", path.to_str().unwrap()]);
        assert!(
            out.status.success(),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&out.stderr)
        );
        n += 1;
    }
    assert!(n >= 8, "{n}");
}
