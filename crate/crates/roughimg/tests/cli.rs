//! End-to-end checks of the `roughimg` binary: exit codes, artifact layout,
//! and run-to-run determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

use tempfile::tempdir;

fn roughimg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_roughimg"))
}

const SMALL_CONFIG: &str = r#"
[surface]
name = "flat:0.8"

[physics]
bc = "dirichlet"
k_plus = 10.0

[measurement]
height = 1.5
half_width = 2.0
n_half = 6

[imaging]
m = 64
grid = "-1:1:21,0.5:1.1:13"

[noise]
delta = 0.3
seed = 5
"#;

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("experiment.toml");
    fs::write(&path, SMALL_CONFIG).unwrap();
    path
}

#[test]
fn missing_config_exits_with_usage_code() {
    let out = roughimg()
        .args(["forward", "--config", "/nonexistent/experiment.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "io problems are usage errors");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error:"), "stderr should explain the failure: {stderr}");
}

#[test]
fn forward_runs_are_deterministic_per_seed() {
    let dir = tempdir().unwrap();
    let config = write_config(dir.path());
    for name in ["a", "b"] {
        let status = roughimg()
            .args(["forward", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.path().join(name))
            .status()
            .unwrap();
        assert!(status.success());
    }
    let status = roughimg()
        .args(["forward", "--config"])
        .arg(&config)
        .args(["--seed", "6", "--out"])
        .arg(dir.path().join("c"))
        .status()
        .unwrap();
    assert!(status.success());

    let bytes = |name: &str| fs::read(dir.path().join(name).join("dataset.rid")).unwrap();
    assert_eq!(bytes("a"), bytes("b"), "same seed must reproduce the dataset bit for bit");
    assert_ne!(bytes("a"), bytes("c"), "a different seed must change the noise");
}

#[test]
fn image_writes_heatmap_profile_and_plot() {
    let dir = tempdir().unwrap();
    let config = write_config(dir.path());
    let fwd = dir.path().join("fwd");
    assert!(roughimg()
        .args(["forward", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&fwd)
        .status()
        .unwrap()
        .success());

    let img = dir.path().join("img");
    assert!(roughimg()
        .args(["image", "--dataset"])
        .arg(fwd.join("dataset.rid"))
        .args(["--grid", "-1:1:21,0.5:1.1:13", "--out"])
        .arg(&img)
        .status()
        .unwrap()
        .success());

    for artifact in ["heatmap.csv", "heatmap.pgm", "profile.csv", "truth.csv", "plot.gp", "manifest.json"]
    {
        assert!(img.join(artifact).is_file(), "missing {artifact}");
    }

    // The grayscale map is 8-bit with the peak pinned at white.
    let pgm = fs::read(img.join("heatmap.pgm")).unwrap();
    let header_end = pgm
        .windows(4)
        .position(|w| w == b"255\n")
        .expect("pgm header ends with maxval 255")
        + 4;
    let header = String::from_utf8_lossy(&pgm[..header_end]);
    assert!(header.starts_with("P5\n"), "binary graymap magic: {header}");
    assert!(header.contains("21 13"), "pixel dimensions row: {header}");
    let pixels = &pgm[header_end..];
    assert_eq!(pixels.len(), 21 * 13);
    assert_eq!(pixels.iter().max(), Some(&255u8));

    // One profile row per grid column, plus the header line.
    let profile = fs::read_to_string(img.join("profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 21 + 1, "profile rows: {profile}");
}

#[test]
fn pipeline_manifest_reports_stages_and_metrics() {
    let dir = tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("run");
    assert!(roughimg()
        .args(["pipeline", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "pipeline");
    assert_eq!(manifest["factorizations"], 1, "all sources share one factorization");
    assert!(manifest["surface_nodes"].as_u64().unwrap() > 0);
    assert_eq!(manifest["condition_estimates"].as_array().unwrap().len(), 1);

    let stages: Vec<&str> = manifest["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    assert_eq!(stages, ["solve", "noise", "write_dataset", "sweep", "write"]);

    let metrics = &manifest["metrics"];
    assert!(metrics["mean_abs"].as_f64().unwrap() >= 0.0);
    assert!(metrics["max_abs"].as_f64().unwrap() >= metrics["mean_abs"].as_f64().unwrap());

    // The flat plane at low noise reconstructs to within one grid cell.
    assert!(
        metrics["mean_abs"].as_f64().unwrap() <= 0.05,
        "flat-plane pipeline should be near exact: {metrics}"
    );
}

#[test]
fn verify_fast_reports_all_passing() {
    let out = roughimg().args(["verify", "fast"]).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("checks in"), "summary line expected: {stdout}");
    assert!(!stdout.contains("FAIL"), "no check may fail: {stdout}");
    let rows = stdout.lines().filter(|l| l.ends_with("pass")).count();
    assert_eq!(rows, 7, "fast level runs seven checks: {stdout}");
}
