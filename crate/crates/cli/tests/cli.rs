use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn patchstab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patchstab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) {
    let o = patchstab(args, out);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.ends_with('\n'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn patch_rows_and_initial_distance() {
    let d = tempfile::tempdir().unwrap();
    ok(&["patch", "--R", "0.5", "--t-max", "100", "--steps", "50"], d.path());
    let (h, rows) = csv(&d.path().join("patch.csv"));
    assert_eq!(h, ["t", "l1", "w1_lower"]);
    assert_eq!(rows.len(), 51);
    assert_eq!(rows[0][1], 1.75);
    let s = json(&d.path().join("summary.json"));
    assert!((s["T_R"].as_f64().unwrap() - 7.5 * PI).abs() < 1e-12);
    let m = json(&d.path().join("run.json"));
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["config"]["params"]["R"], 0.5);
}

#[test]
fn patch_equal_radii_is_zero() {
    let d = tempfile::tempdir().unwrap();
    ok(&["patch", "--R", "1"], d.path());
    let (_, rows) = csv(&d.path().join("patch.csv"));
    assert!(rows.iter().all(|r| r[1] == 0.0 && r[2] == 0.0));
    assert!(json(&d.path().join("summary.json"))["T_R"].is_null());
}

#[test]
fn patch_saturates_after_separation() {
    let d = tempfile::tempdir().unwrap();
    ok(&["patch", "--R", "2", "--t-max", "200"], d.path());
    let (_, rows) = csv(&d.path().join("patch.csv"));
    let after: Vec<_> = rows.iter().filter(|r| r[0] >= 30.0 * PI).collect();
    assert!(!after.is_empty());
    assert!(after.iter().all(|r| r[1] == 2.0));
    assert!(rows.iter().any(|r| r[1] < 2.0));
}

#[test]
fn patch_rejects_bad_radius() {
    let d = tempfile::tempdir().unwrap();
    let o = patchstab(&["patch", "--R", "-1"], d.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("R must be"));
}

#[test]
fn spectrum_reproduces_reference_values() {
    for (k, n, nodes, want) in [("4", "200", 201, 0.073), ("8", "100", 101, 0.1701)] {
        let d = tempfile::tempdir().unwrap();
        ok(&["spectrum", "--K", k, "--ntheta", n], d.path());
        let s = json(&d.path().join("summary.json"));
        let got = s["max_real"].as_f64().unwrap();
        assert!((got - want).abs() <= 2e-3, "K={k}: {got}");
        assert_eq!(s["threshold_1_over_15"].as_f64().unwrap(), 1.0 / 15.0);
        assert!(s["symmetric_residual"].as_f64().unwrap() < 1e-10);
        let (h, rows) = csv(&d.path().join("eigenvalues.csv"));
        assert_eq!(h, ["re", "im"]);
        assert!(rows.windows(2).all(|w| w[0][0] >= w[1][0]));
        assert_eq!(rows[0][0], got);
        let (h, rows) = csv(&d.path().join("dominant_eigenvector.csv"));
        assert_eq!(h, ["theta", "h"]);
        assert_eq!(rows.len(), nodes);
    }
}

#[test]
fn spectrum_single_mode() {
    let d = tempfile::tempdir().unwrap();
    ok(&["spectrum", "--K", "1", "--ntheta", "100"], d.path());
    let (_, rows) = csv(&d.path().join("eigenvalues.csv"));
    assert_eq!(rows.len(), 1);
}

#[test]
fn spectrum_sequential_matches_parallel() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&["spectrum", "--K", "6", "--ntheta", "60"], a.path());
    ok(&["spectrum", "--K", "6", "--ntheta", "60", "--sequential"], b.path());
    for f in ["eigenvalues.csv", "dominant_eigenvector.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
}

#[test]
fn evolve_unit_sphere_stays_put() {
    let d = tempfile::tempdir().unwrap();
    ok(
        &["evolve", "--r0", "const:1", "--T", "10", "--dt", "0.01", "--svg"],
        d.path(),
    );
    let s = json(&d.path().join("summary.json"));
    assert!(s["sup_deviation"].as_f64().unwrap() <= 1e-2);
    assert!((s["final_time"].as_f64().unwrap() - 10.0).abs() < 1e-9);
    assert!((s["c3"].as_f64().unwrap() + 40.0 / 15.0).abs() < 1e-9);
    // t = 0 and t = 10
    assert!(d.path().join("snapshot_00001.svg").exists());
    assert!(!d.path().join("snapshot_00002.csv").exists());
    let (h, rows) = csv(&d.path().join("snapshot_00001.csv"));
    assert_eq!(h, ["theta", "r"]);
    assert_eq!(rows.len(), 101);
}

#[test]
fn evolve_rejects_cfl_before_stepping() {
    let d = tempfile::tempdir().unwrap();
    let o = patchstab(&["evolve", "--dt", "10"], d.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("CFL"));
    let s = json(&d.path().join("summary.json"));
    assert_eq!(s["final_time"].as_f64().unwrap(), 0.0);
    assert_eq!(json(&d.path().join("run.json"))["status"], "halted");
}

#[test]
fn evolve_from_saved_eigenvector() {
    let spectrum_dir = tempfile::tempdir().unwrap();
    ok(&["spectrum", "--K", "4", "--ntheta", "100"], spectrum_dir.path());
    let vec = spectrum_dir.path().join("dominant_eigenvector.csv");
    let d = tempfile::tempdir().unwrap();
    let args = [
        "evolve",
        "--perturb",
        "dominant",
        "--eps",
        "0.2",
        "--eigvec",
        vec.to_str().unwrap(),
        "--T",
        "1",
        "--every",
        "0.5",
    ];
    ok(&args, d.path());
    let (_, h) = csv(&vec);
    let (_, r) = csv(&d.path().join("snapshot_00000.csv"));
    for (a, b) in h.iter().zip(&r) {
        assert!((b[1] - 1.0 - 0.2 * a[1]).abs() < 1e-12);
    }
    assert_eq!(json(&d.path().join("summary.json"))["snapshots"], 3);
}

#[test]
fn evolve_perturbed_long_run() {
    let d = tempfile::tempdir().unwrap();
    let args = [
        "evolve",
        "--perturb",
        "dominant",
        "--eps",
        "0.2",
        "--T",
        "150",
        "--dt",
        "0.01",
        "--ntheta",
        "100",
        "--nphi",
        "200",
    ];
    ok(&args, d.path());
    let s = json(&d.path().join("summary.json"));
    assert!((s["final_time"].as_f64().unwrap() - 150.0).abs() < 1e-9);
    // every 10 time units, plus t = 0
    assert_eq!(s["snapshots"], 16);
}

#[test]
fn micro_single_particle() {
    let d = tempfile::tempdir().unwrap();
    ok(&["micro", "--N", "1", "--T", "1", "--dt", "0.01"], d.path());
    let r = json(&d.path().join("report.json"));
    let us = r["stokes_velocity"].as_f64().unwrap();
    assert!((us + 1.0 / (6.0 * PI * 0.01)).abs() < 1e-12);
    assert_eq!(r["mean_velocity"][2].as_f64().unwrap(), us);
    assert!((r["mean_fall_speed"].as_f64().unwrap() + us).abs() < 1e-9);
    let m = json(&d.path().join("manifest.json"));
    assert_eq!(m["frame_times"].as_array().unwrap().len(), 11);
    let (h, rows) = csv(&d.path().join("frame_00010.csv"));
    assert_eq!(h, ["id", "x", "y", "z"]);
    assert_eq!(rows.len(), 1);
}

#[test]
fn micro_mean_velocity_near_formula() {
    let d = tempfile::tempdir().unwrap();
    ok(
        &["micro", "--N", "2000", "--seed", "7", "--T", "0.01", "--dt", "0.01"],
        d.path(),
    );
    let r = json(&d.path().join("report.json"));
    assert!(r["relative_error_vs_v0"].as_f64().unwrap() <= 0.05);
}

#[test]
fn micro_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["micro", "--N", "300", "--seed", "7", "--T", "0.05", "--dt", "0.01"];
    ok(&args, a.path());
    ok(&args, b.path());
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n != "run.json")
        .collect();
    names.sort();
    assert!(names.len() > 3);
    for n in names {
        assert_eq!(
            std::fs::read(a.path().join(&n)).unwrap(),
            std::fs::read(b.path().join(&n)).unwrap(),
            "{n:?}"
        );
    }
}

#[test]
fn flags_override_config_file() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"seed": 3, "out": "ignored", "params": {"R": 2.0, "steps": 4}}"#,
    )
    .unwrap();
    let out = d.path().join("run");
    ok(&["patch", "--config", cfg.to_str().unwrap(), "--R", "0.5"], &out);
    let m = json(&out.join("run.json"));
    assert_eq!(m["config"]["seed"], 3);
    assert_eq!(m["config"]["params"]["R"], 0.5);
    assert_eq!(m["config"]["params"]["steps"], 4);
    assert_eq!(csv(&out.join("patch.csv")).1.len(), 5);
}

#[test]
fn manifest_replays_the_run() {
    let d = tempfile::tempdir().unwrap();
    let first = d.path().join("first");
    ok(
        &["micro", "--N", "50", "--seed", "11", "--T", "0.03", "--dt", "0.01"],
        &first,
    );
    let second = d.path().join("second");
    ok(
        &["micro", "--config", first.join("run.json").to_str().unwrap()],
        &second,
    );
    for f in ["manifest.json", "report.json", "frame_00001.csv"] {
        assert_eq!(
            std::fs::read(first.join(f)).unwrap(),
            std::fs::read(second.join(f)).unwrap()
        );
    }
}

#[test]
fn busy_output_directory_is_refused() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join(".lock"), "").unwrap();
    assert!(!patchstab(&["patch"], d.path()).status.success());
}
