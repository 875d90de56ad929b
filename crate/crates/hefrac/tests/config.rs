use std::fs;

use hefrac::config::{parse_str, Preset};
use hefrac::error::exit;
use hefrac::{parse_config, RunConfig};

#[test]
fn empty_file_gives_table_values() {
    let cfg = parse_str("").unwrap();
    let m = &cfg.material;
    assert_eq!(m.youngs_modulus, 207_000.0);
    assert_eq!(m.poisson_ratio, 0.3);
    assert_eq!(m.yield_stress, 800.0);
    assert_eq!(m.hardening_exponent, 0.04);
    assert_eq!(m.toughness, 40.0);
    assert_eq!(m.diffusivity, 1.4e-4);
    assert_eq!(m.partial_molar_volume, 2000.0);
    assert_eq!(m.length_scale, 0.085);
    assert_eq!(m.toughness_min, 2.0);
    assert_eq!(m.degradation_rate, 0.5);
    assert_eq!(cfg.geometry.width, 7.0);
    assert_eq!(cfg.geometry.crack_length, 2.45);
    assert_eq!(cfg.geometry.gauge_length, 25.4);
    assert_eq!(cfg.mesh.preset, Preset::Desk);
    assert_eq!(cfg.environment.h2s, Some(100.0));
}

#[test]
fn unknown_keys_are_named() {
    let err = parse_str("[material]\nyoung = 1.0\n").unwrap_err();
    assert!(err.contains("young"), "{err}");
    assert!(err.contains("line 2"), "{err}");
    let err = parse_str("[solvr]\n").unwrap_err();
    assert!(err.contains("solvr"), "{err}");
}

#[test]
fn negative_length_scale_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[material]\nlength_scale = -0.085\n[geometry]\nload = 8000.0\n").unwrap();
    let err = parse_config(&path).unwrap_err();
    assert_eq!(err.exit_code(), exit::CONFIG, "{err}");
}

#[test]
fn load_and_k_are_exclusive() {
    let cfg = parse_str("[geometry]\nload = 8000.0\nk_applied = 25.0\n").unwrap();
    assert!(cfg.validate().is_err());
    let cfg = parse_str("[geometry]\nk_applied = 25.0\n").unwrap();
    let k = cfg.applied_k().unwrap();
    assert!((k - 25.0).abs() < 1e-9);
}

#[test]
fn echo_parses_back_to_the_same_run() {
    let text = "[geometry]\nk_applied = 30.0\nhorizon = 48.0\n[environment]\nconstant_ppm = 2.5\n[solver]\nmax_passes = 12\n";
    let cfg = parse_str(text).unwrap();
    let echo = cfg.echo().unwrap();
    assert!(echo.starts_with("# hefrac"));
    let back = parse_str(&echo).unwrap();
    // the echo carries the load in N
    assert_eq!(back.geometry.k_applied, None);
    assert_eq!(back.geometry.load, Some(cfg.geometry.resolved_load().unwrap()));
    let mut expected = cfg.clone();
    expected.geometry.load = back.geometry.load;
    expected.geometry.k_applied = None;
    assert_eq!(back, expected);
    assert_eq!(back.echo().unwrap(), echo);
}

#[test]
fn environment_needs_exactly_one_source() {
    let cfg = parse_str("[geometry]\nload = 1.0\n[environment]\nh2s = 7.0\nconstant_ppm = 1.0\n").unwrap();
    assert!(cfg.validate().is_err());
    let cfg = parse_str("[geometry]\nload = 1.0\n[environment]\nschedule = \"missing.csv\"\n").unwrap();
    assert!(cfg.validate().is_err());
}

#[test]
fn bundled_configs_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data/configs");
    for name in ["sent_100.toml", "sent_transient.toml"] {
        let cfg: RunConfig = parse_config(&std::path::Path::new(dir).join(name)).unwrap();
        cfg.sent_config().unwrap();
    }
    let (manifest, _) = hefrac::campaign::parse_manifest(&std::path::Path::new(dir).join("campaign.toml")).unwrap();
    assert_eq!(manifest.environments.len(), 2);
}
