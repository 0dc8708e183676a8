//! Front-end contracts: config validation, deterministic CSV bodies, and
//! the fast validate bundle.

use qramsim::cli::{run_export_pulse, run_validate, RunConfig};

#[test]
fn config_rejects_unknown_fields_and_bad_values() {
    let dir = std::path::PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad_config.json");
    std::fs::write(&bad, r#"{"preset": "PS2", "wat": 3}"#).unwrap();
    assert!(RunConfig::load(&bad).is_err(), "unknown key must be rejected");
    let bad2 = dir.join("bad_config2.json");
    std::fs::write(&bad2, r#"{"preset": "PS9"}"#).unwrap();
    assert!(RunConfig::load(&bad2).is_err(), "unknown preset must be rejected");
    let bad3 = dir.join("bad_config3.json");
    std::fs::write(&bad3, r#"{"n": 1}"#).unwrap();
    assert!(RunConfig::load(&bad3).is_err(), "n < 2 must be rejected");
    let good = dir.join("good_config.json");
    std::fs::write(&good, r#"{"preset": "PS3", "rail": "dual", "n": 6}"#).unwrap();
    let cfg = RunConfig::load(&good).unwrap();
    assert_eq!(cfg.n, 6);
}

#[test]
fn csv_bodies_are_deterministic() {
    // bodies (non-metadata lines) must be byte-identical across runs
    let body = |text: &str| -> String {
        text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
    };
    let base = std::path::PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("determinism");
    let mut cfg = RunConfig::default();
    cfg.out_dir = base.join("a");
    let p1 = run_export_pulse(&cfg, 200).unwrap();
    let first = std::fs::read_to_string(&p1).unwrap();
    cfg.out_dir = base.join("b");
    let p2 = run_export_pulse(&cfg, 200).unwrap();
    let second = std::fs::read_to_string(&p2).unwrap();
    assert_eq!(body(&first), body(&second), "identical config must produce identical bodies");
}

#[test]
fn validate_bundle_is_green() {
    let failures = run_validate().unwrap();
    assert!(failures.is_empty(), "validate reported: {failures:?}");
}
