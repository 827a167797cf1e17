use std::path::{Path, PathBuf};
use std::process::Command;

use mfd_cli::{config_path, run};

fn mfd(args: &[&str]) -> i32 {
    let mut argv = vec!["mfd".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    run(argv)
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn data_rows(path: &str) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn generate_circle(dir: &Path, n: usize) -> String {
    let out = p(dir, "c.csv");
    let code = mfd(&[
        "generate", "--kind", "circle", "--n", &n.to_string(), "--noise-var", "0.1", "--seed", "1", "--out", &out,
    ]);
    assert_eq!(code, 0);
    out
}

#[test]
fn generate_writes_cloud_truth_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = generate_circle(dir.path(), 1000);
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|r| r.split(',').count() == 2));
    assert_eq!(data_rows(&p(dir.path(), "c.truth.csv")).len(), 1000);
    let echo: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(config_path(Path::new(&out))).unwrap()).unwrap();
    assert_eq!(echo["command"], "generate");
    assert_eq!(echo["shape"]["radius"], 1.0);
}

#[test]
fn denoise_keeps_shape_and_reports_bands() {
    let dir = tempfile::tempdir().unwrap();
    let input = generate_circle(dir.path(), 400);
    let out = p(dir.path(), "d.csv");
    assert_eq!(mfd(&["denoise", "--in", &input, "--k", "30", "--levels", "5", "--out", &out]), 0);
    assert_eq!(data_rows(&out).len(), 400);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p(dir.path(), "d.report.json")).unwrap()).unwrap();
    let dims = report["dimensions"].as_array().unwrap();
    assert_eq!(dims.len(), 2);
    for d in dims {
        assert_eq!(d["energies"].as_array().unwrap().len(), 6);
        assert_eq!(d["retained"][0], 0);
    }
    assert_eq!(report["config"]["cheb_order"], 20);
    assert!(report["rmse_output"].as_f64().unwrap() < report["rmse_input"].as_f64().unwrap());
    let echo: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p(dir.path(), "d.config.json")).unwrap()).unwrap();
    assert_eq!(echo["cheb_order"], 20);
    assert_eq!(echo["energy_threshold"], 0.99);
}

#[test]
fn outputs_are_deterministic_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let input = generate_circle(dir.path(), 300);
    let first = std::fs::read(&input).unwrap();
    generate_circle(dir.path(), 300);
    assert_eq!(first, std::fs::read(&input).unwrap());

    let out = p(dir.path(), "d.csv");
    assert_eq!(mfd(&["denoise", "--in", &input, "--k", "12", "--out", &out]), 0);
    let a = std::fs::read(&out).unwrap();
    std::fs::remove_file(&out).unwrap();
    let echo = config_path(Path::new(&out));
    assert_eq!(mfd(&["--replay", echo.to_str().unwrap()]), 0);
    assert_eq!(a, std::fs::read(&out).unwrap());
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = generate_circle(dir.path(), 100);
    let out = p(dir.path(), "d.csv");
    assert_eq!(mfd(&["denoise", "--in", &input, "--k", "0", "--out", &out]), 1);
    assert_eq!(mfd(&["denoise", "--in", &input, "--k", "100", "--out", &out]), 1);
    assert_eq!(mfd(&["denoise", "--in", &p(dir.path(), "missing.csv"), "--out", &out]), 1);
    assert_eq!(mfd(&["denoise", "--in", &input, "--out", &out, "--bogus"]), 1);
    assert_eq!(mfd(&["generate", "--kind", "torus", "--out", &out]), 1);
    assert_eq!(mfd(&[]), 1);
    assert_eq!(mfd(&["--replay", &p(dir.path(), "none.json")]), 1);
    assert!(!Path::new(&out).exists());
}

#[test]
fn help_and_version_exit_with_zero() {
    assert_eq!(mfd(&["--help"]), 0);
    assert_eq!(mfd(&["--version"]), 0);
    assert_eq!(mfd(&["denoise", "--help"]), 0);
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = p(dir.path(), "bad.csv");
    std::fs::write(&bad, "1,2\n3\n").unwrap();
    assert_eq!(mfd(&["denoise", "--in", &bad, "--k", "1", "--out", &p(dir.path(), "d.csv")]), 2);
}

#[test]
fn analyze_writes_theory_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = generate_circle(dir.path(), 300);
    let out = p(dir.path(), "a.json");
    let csv = p(dir.path(), "bounds.csv");
    let code = mfd(&[
        "analyze", "--in", &input, "--kind", "circle", "--out", &out, "--trials", "30", "--bounds-csv", &csv,
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["meta"]["tau"], 1.0);
    assert_eq!(report["clean"].as_array().unwrap().len(), 2);
    assert!(report["noisy"]["q_xi"].as_f64().unwrap() > 0.0);
    assert_eq!(report["noise"]["scales"].as_array().unwrap().len(), 5);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 6);

    let roll = p(dir.path(), "r.csv");
    assert_eq!(mfd(&["generate", "--kind", "swiss-roll-with-hole", "--n", "200", "--out", &roll]), 0);
    assert_eq!(mfd(&["analyze", "--in", &roll, "--kind", "swiss-roll-with-hole", "--out", &out]), 1);
}

#[test]
fn sweep_and_spectrum_tables() {
    let dir = tempfile::tempdir().unwrap();
    let input = generate_circle(dir.path(), 300);
    let out = p(dir.path(), "s.csv");
    assert_eq!(mfd(&["sweep", "--in", &input, "--out", &out, "--k-values", "10,14"]), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "k,rmse");
    assert!(lines[1].starts_with("10,") && lines[2].starts_with("14,"));

    let truth = p(dir.path(), "c.truth.csv");
    let lone = p(dir.path(), "lone.csv");
    std::fs::copy(&truth, &lone).unwrap();
    assert_eq!(mfd(&["sweep", "--in", &lone, "--out", &out]), 1);

    let profile = p(dir.path(), "sp.csv");
    assert_eq!(mfd(&["spectrum", "--in", &truth, "--k", "10", "--out", &profile]), 0);
    let text = std::fs::read_to_string(&profile).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 6);
}

fn binary() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_mfd"))
}

#[test]
fn binary_honours_thread_cap_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "c.csv");
    let status = Command::new(binary())
        .args(["generate", "--kind", "sphere", "--n", "50", "--out", &out])
        .env("MFD_THREADS", "2")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let status = Command::new(binary())
        .args(["generate", "--kind", "sphere", "--n", "50", "--out", &out])
        .env("MFD_THREADS", "zero")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let status = Command::new(binary()).arg("--version").status().unwrap();
    assert_eq!(status.code(), Some(0));
}
