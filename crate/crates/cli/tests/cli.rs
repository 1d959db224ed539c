use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn fundsol(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_fundsol"))
        .arg("--output-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("spawn fundsol");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn summary(dir: &Path, tag: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{tag}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn symbols() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../symbols")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn certify_passes_on_the_default_symbol() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = fundsol(dir.path(), &["certify"]);
    assert_eq!(code, 0, "{err}");
    let s = summary(dir.path(), "certify");
    assert_eq!(s["pass"], true);
    assert_eq!(s["report"]["certificate"]["elliptic"], true);
}

#[test]
fn certify_rejects_a_symbol_with_degenerate_hessian() {
    let dir = tempfile::tempdir().unwrap();
    let sym = dir.path().join("degenerate.toml");
    // xi1^4 + xi2^4 has det Hess = 144 xi1^2 xi2^2, vanishing on the axes.
    std::fs::write(
        &sym,
        "name = \"degenerate\"\ndimension = 2\norder = 4\nterms = [ { alpha = [4, 0], coeff = 1.0 }, { alpha = [0, 4], coeff = 1.0 } ]\n",
    )
    .unwrap();
    let (code, _) = fundsol(dir.path(), &["--symbol", sym.to_str().unwrap(), "certify"]);
    assert_eq!(code, 1);
    let s = summary(dir.path(), "certify");
    assert_eq!(s["pass"], false);
    assert_eq!(s["report"]["certificate"]["nondegenerate"], false);
}

#[test]
fn the_l2_pair_has_zero_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = fundsol(dir.path(), &["lpq", "--pair", "2,2"]);
    assert_eq!(code, 0, "{err}");
    let s = summary(dir.path(), "lpq-small-t");
    let est = &s["report"]["estimates"][0];
    assert_eq!(est["reference_exponent"], 0.0);
    assert!(est["fitted_exponent"].as_f64().unwrap().abs() < 0.05);
    assert!(dir.path().join("lpq-small-t-smallt.csv").exists());
}

#[test]
fn laplacian_large_time_decay_passes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[decay]\nlarge_t_times = [1.0, 4.0]\nlarge_t_radii = [0.0, 1.0, 2.0]\n");
    let sym = symbols().join("laplacian.toml");
    let (code, err) = fundsol(
        dir.path(),
        &["--config", config.to_str().unwrap(), "--symbol", sym.to_str().unwrap(), "decay", "--regime", "large-t"],
    );
    assert_eq!(code, 0, "{err}");
    let s = summary(dir.path(), "decay-envelope-large-t");
    for sample in s["report"]["fits"][0]["samples"].as_array().unwrap() {
        let t = sample["t"].as_f64().unwrap();
        let exact = 1.0 / (4.0 * std::f64::consts::PI * t);
        assert!((sample["abs"].as_f64().unwrap() / exact - 1.0).abs() < 1e-4);
    }
    let csv = std::fs::read_to_string(dir.path().join("decay-envelope-large-t-large_t.csv")).unwrap();
    assert!(csv.starts_with("t,r,abs,envelope"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "[decay]\nno_such_key = 1\n");
    assert_eq!(fundsol(dir.path(), &["--config", unknown.to_str().unwrap(), "certify"]).0, 2);
    let bad = write_config(dir.path(), "[lpq]\ntolerance = -1.0\n");
    assert_eq!(fundsol(dir.path(), &["--config", bad.to_str().unwrap(), "lpq"]).0, 2);
    assert_eq!(fundsol(dir.path(), &["--symbol", "/nonexistent.toml", "certify"]).0, 2);
    assert_eq!(fundsol(dir.path(), &["lpq", "--pair", "4,4"]).0, 2);
    // B for m = 4 is an endpoint pair.
    assert_eq!(fundsol(dir.path(), &["lpq", "--pair", "1,3"]).0, 2);
    assert_eq!(fundsol(dir.path(), &["lpq", "--pair", "two"]).0, 2);
    let s = summary(dir.path(), "lpq-small-t");
    assert!(s["error"].as_str().unwrap().contains("endpoint") || s["error"].as_str().unwrap().contains("admissible"));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let text = "[kernel_check]\nscaling_points = 6\nscaling_times = [0.25, 4.0]\n";
    for dir in [&a, &b] {
        let config = write_config(dir.path(), text);
        let (code, err) = fundsol(dir.path(), &["--config", config.to_str().unwrap(), "--seed", "7", "kernel", "--check", "scaling"]);
        assert_eq!(code, 0, "{err}");
    }
    for file in ["kernel-scaling.json", "kernel-scaling-rows.csv"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
    assert_eq!(summary(a.path(), "kernel-scaling")["seed"], 7);
}
