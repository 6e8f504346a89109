use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"{
    "schema_version": 1,
    "name": "NAME",
    "fractal": { "n": 1, "m": 2, "r": 0.3333333333333333,
                 "translations": [[0.0], [0.6666666666666666]], "level": LEVEL },
    "analysis": { "s": S, "p": 2.0, "operator": "nystrom" },
    "fit": { "window": { "lo": 10, "hi": 60 }, "tolerance": TOL },
    "convergence_levels": [6, 7],
    "audits": { "carl_corpus": 3, "composition_triples": 3, "entropy_triples": 1 },
    "seed": 3
}"#;

fn write_config(dir: &Path, name: &str, level: usize, s: f64, tol: f64) -> PathBuf {
    let text = SMALL
        .replace("NAME", name)
        .replace("LEVEL", &level.to_string())
        .replace("\"s\": S", &format!("\"s\": {s:?}"))
        .replace("TOL", &format!("{tol:?}"));
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, text).unwrap();
    path
}

fn fracspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracspec")).args(args).output().unwrap()
}

fn entries(dir: &Path) -> Vec<String> {
    match std::fs::read_dir(dir) {
        Ok(rd) => {
            let mut v: Vec<String> = rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
            v.sort();
            v
        }
        Err(_) => Vec::new(),
    }
}

#[test]
fn passing_spectrum_run_writes_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ok", 7, 0.45, 0.2);
    let out = tmp.path().join("out");
    let o = fracspec(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains(": PASS"));
    assert_eq!(entries(&out), ["ok_plot.py", "ok_report.json", "ok_spectrum.csv"]);
}

#[test]
fn failing_verdict_exits_one() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "tight", 7, 0.45, 0.2);
    let out = tmp.path().join("out");
    let o = fracspec(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--tolerance", "1e-6"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains(": FAIL"));
}

#[test]
fn window_violation_is_a_config_error_with_no_outputs() {
    let tmp = TempDir::new().unwrap();
    // 2s = 0.3 lies below n − d ≈ 0.369.
    let cfg = write_config(tmp.path(), "outside", 7, 0.15, 0.2);
    let out = tmp.path().join("out");
    let o = fracspec(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sp = 0.3"));
    assert!(entries(&out).is_empty());
}

#[test]
fn too_few_eigenvalues_is_a_numerical_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "coarse", 2, 0.45, 0.2);
    let out = tmp.path().join("out");
    let o = fracspec(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fitting the decay"));
    assert!(entries(&out).is_empty());
}

#[test]
fn unknown_fields_and_bad_flags_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("typo.json");
    let text = std::fs::read_to_string(write_config(tmp.path(), "typo", 7, 0.45, 0.2)).unwrap();
    std::fs::write(&path, text.replace("\"seed\"", "\"sead\"")).unwrap();
    assert_eq!(fracspec(&["spectrum", "--config", path.to_str().unwrap()]).status.code(), Some(2));

    let cfg = write_config(tmp.path(), "neg", 7, 0.45, 0.2);
    assert_eq!(fracspec(&["spectrum", "--config", cfg.to_str().unwrap(), "--tolerance", "-1"]).status.code(), Some(2));
    assert_eq!(fracspec(&["spectrum", "--config", "/nonexistent/config.json"]).status.code(), Some(2));
}

#[test]
fn parallel_configs_report_the_worst_status() {
    let tmp = TempDir::new().unwrap();
    let good = write_config(tmp.path(), "good", 7, 0.45, 0.2);
    let bad = write_config(tmp.path(), "bad", 7, 0.45, 1e-6);
    let out = tmp.path().join("out");
    let o = fracspec(&[
        "spectrum",
        "--config",
        good.to_str().unwrap(),
        "--config",
        bad.to_str().unwrap(),
        "--jobs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("good.json: PASS") && stdout.contains("bad.json: FAIL"), "{stdout}");
}

#[test]
fn convergence_accepts_a_level_list() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "conv", 7, 0.45, 0.2);
    let out = tmp.path().join("out");
    let o = fracspec(&["convergence", "--config", cfg.to_str().unwrap(), "--levels", "6,7", "--out", out.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("L6=") && stdout.contains("L7="), "{stdout}");
    assert!(entries(&out).iter().any(|f| f.starts_with("conv_convergence")));
}

#[test]
fn entropy_lab_prints_brackets() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "lab", 7, 0.45, 0.2);
    let out = tmp.path().join("out");
    let o = fracspec(&["entropy-lab", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("e_1 in ["));
    assert_eq!(entries(&out), ["lab_entropy_lab.json"]);
}
