use std::path::Path;
use std::process::{Command, Output};

fn fracwave(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracwave")).args(args).current_dir(cwd).output().unwrap()
}

const SMALL: &str = "[grid]\nhalf_length = 8.0\nn_points = 128\n[time]\nn_steps = 16\n";

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn ml_prints_fifteen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracwave(&["ml", "--alpha", "2", "--beta", "1", "--z", "-1"], dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), format!("{:.14e}", 1f64.cos()));
    let out = fracwave(&["ml", "--alpha", "1", "--beta", "1", "--z", "0,1"], dir.path());
    let s = String::from_utf8(out.stdout).unwrap();
    let parts: Vec<f64> = s.trim().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((parts[0] - 1f64.cos()).abs() < 1e-14 && (parts[1] - 1f64.sin()).abs() < 1e-14);
}

#[test]
fn run_writes_a_complete_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = fracwave(&["run", "--config", &cfg, "--out", "r", "--quiet"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let mut names: Vec<String> =
        std::fs::read_dir(dir.path().join("r")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["config.toml", "manifest.json", "metadata.json", "trajectory.csv"]);
}

#[test]
fn seed_flag_changes_noise_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}[noise]\nsigma = 0.1\n"));
    for (name, seed) in [("a", "1"), ("b", "1"), ("c", "2")] {
        let out = fracwave(&["run", "--config", &cfg, "--out", name, "--seed", seed, "--quiet"], dir.path());
        assert!(out.status.success());
    }
    let read = |n: &str| std::fs::read(dir.path().join(n).join("trajectory.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "[grid]\nn_points = \"many\"\n");
    let out = fracwave(&["run", "--config", &bad, "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2, column 12"));

    let gate = write_config(dir.path(), &format!("{SMALL}[schedule]\nkappa_cap = 0.01\n"));
    let out = fracwave(&["run", "--config", &gate, "--out", "y"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("y").exists());

    let wild = write_config(dir.path(), &format!("{SMALL}[nonlinearity]\nf = \"50*u\"\n[solver]\nmax_iter = 200\n"));
    let out = fracwave(&["run", "--config", &wild, "--out", "z"], dir.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));

    let out = fracwave(&["run", "--config", "missing.toml", "--out", "w"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_subset_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracwave(&["validate", "--only", "1,2,8", "--out", "v"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 3);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("v/metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["criteria"].as_array().unwrap().len(), 3);
    assert_eq!(meta["passed"], true);
}

#[test]
fn sweep_and_noise_dump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}[schedule]\neps_k_max = 8\n[noise]\nsigma = 0.1\n"));
    let out = fracwave(&["sweep-epsilon", "--config", &cfg, "--out", "s"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("association strictly decreasing"));
    assert!(dir.path().join("s/association.csv").exists());
    let out = fracwave(&["noise-dump", "--config", &cfg, "--out", "n", "--quiet"], dir.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("n/noise.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 17 * 128);
}
