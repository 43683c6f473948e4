use std::path::Path;
use std::process::{Command, Output};

fn cos2a(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cos2a"))
        .current_dir(dir)
        .env_remove("COS2A_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cos2a(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn product(dir: &Path, h: usize, w: usize) {
    ok(dir, &["synth", "--out", "scene.cube", "--height", &h.to_string(), "--width", &w.to_string()]);
    ok(dir, &["simulate", "--input", "scene.cube", "--out", "product.cube"]);
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("run/manifest.json")).unwrap()).unwrap()
}

#[test]
fn every_command_has_help() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["synth", "simulate", "rough", "estimate-response", "superres", "metrics", "calibrate"] {
        let text = ok(dir.path(), &[cmd, "--help"]);
        assert!(text.contains("Usage"), "{cmd}");
    }
}

#[test]
fn superres_writes_four_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    product(d, 12, 12);
    ok(d, &["--threads", "1", "superres", "--input", "product.cube", "--out", "run", "--cnmf-outer-max", "5"]);
    for f in ["superres.cube", "response.csv", "trace.csv", "manifest.json"] {
        assert!(d.join("run").join(f).is_file(), "{f}");
    }
    let m = manifest(d);
    let timings = m["timings_s"].as_array().unwrap();
    assert_eq!(timings.len(), 5);
    assert!(timings.iter().all(|t| t["seconds"].as_f64().unwrap() > 0.0));
    assert_eq!(m["config"]["cnmf"]["outer_max"], 5);

    let report = ok(d, &["metrics", "--reference", "scene.cube", "--test", "run/superres.cube"]);
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    for key in ["psnr_db", "sam_deg", "rmse", "ssim"] {
        assert!(report[key].is_number(), "{key}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    product(d, 12, 12);
    std::fs::write(
        d.join("cfg.json"),
        r#"{"lambda": 4, "alpha": 0.01, "cnmf": {"outer_max": 3}}"#,
    )
    .unwrap();
    ok(d, &["superres", "--input", "product.cube", "--out", "run", "--config", "cfg.json", "--alpha", "0.004"]);
    let cfg = &manifest(d)["config"];
    assert_eq!(cfg["lambda"], 4.0);
    assert_eq!(cfg["alpha"], 0.004);
    assert_eq!(cfg["cnmf"]["hyper_weight"], 2.0);
    assert_eq!(cfg["cnmf"]["lambda1"], 0.002);
    assert_eq!(cfg["cnmf"]["outer_max"], 3);
}

#[test]
fn odd_grid_fails_at_duality_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    product(d, 6, 9);
    let out = cos2a(d, &["superres", "--input", "product.cube", "--out", "run"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("duality_transform"), "{err}");
    assert!(!d.join("run").exists());
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(cos2a(d, &["superres", "--input", "missing.cube", "--out", "run"]).status.code(), Some(2));
    std::fs::write(d.join("bad.json"), "{not json").unwrap();
    product(d, 12, 12);
    let out = cos2a(d, &["superres", "--input", "product.cube", "--out", "run", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = cos2a(d, &["superres", "--input", "product.cube", "--out", "run", "--alpha", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn staged_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    product(d, 12, 12);
    ok(d, &["rough", "--input", "product.cube", "--out", "rough.cube", "--unfold-stages", "2"]);
    ok(d, &["estimate-response", "--input", "product.cube", "--rough", "rough.cube", "--out", "d.csv"]);
    let csv = std::fs::read_to_string(d.join("d.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 172);
    ok(d, &["calibrate", "--reference", "scene.cube", "--product", "product.cube", "--out", "cal.cube", "--gains", "g.csv"]);
    let gains = std::fs::read_to_string(d.join("g.csv")).unwrap();
    assert_eq!(gains.trim().split(',').count(), 144);
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = Command::new(env!("CARGO_BIN_EXE_cos2a"))
        .current_dir(d)
        .env("COS2A_THREADS", "1")
        .args(["synth", "--out", "s.cube", "--height", "8", "--width", "8"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_cos2a"))
        .current_dir(d)
        .env("COS2A_THREADS", "many")
        .args(["synth", "--out", "s.cube"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
