use std::fs;
use std::path::{Path, PathBuf};

use hefrac::cli::main_with;
use hefrac::environment::read_transient;
use hefrac::output::STEP_HEADER;
use hefrac::vtk::Grid;
use hefrac::error::exit;
use hefrac_core::datasets;

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = main_with(std::iter::once("hefrac").chain(args.iter().copied()), &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn value(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("{key} missing in {text}"));
    line.split('=').nth(1).unwrap().trim().parse().unwrap()
}

#[test]
fn no_arguments_is_a_usage_error() {
    assert_eq!(run(&[]).0, exit::USAGE);
    assert_eq!(run(&["sent", "frobnicate"]).0, exit::USAGE);
    assert_eq!(run(&["--help"]).0, exit::OK);
}

#[test]
fn fit_recovers_synthetic_diffusivity() {
    let file = data("transients/synthetic_d1.4e-10.csv");
    let (code, text) = run(&["permeation", "fit", file.to_str().unwrap()]);
    assert_eq!(code, 0);
    let d = value(&text, "diffusivity_m2_s");
    assert!((d / 1.4e-10 - 1.0).abs() < 1e-3, "{d}");
    assert!(value(&text, "r_squared") >= 0.99);
}

#[test]
fn bundled_transients_match_the_reconstructions() {
    for s in datasets::ALL {
        let file = data(&format!("transients/h2s_{}.csv", s.h2s));
        let read = read_transient(&file, datasets::MEMBRANE_THICKNESS).unwrap();
        let built = s.transient(720.0, 1800.0);
        assert_eq!(read.times, built.times);
        for (a, b) in read.current.iter().zip(&built.current) {
            assert!((a - b).abs() <= 1e-12 * b.abs(), "{} %: {a} vs {b}", s.h2s);
        }
    }
}

#[test]
fn schedule_command_writes_knots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("schedule.csv");
    let file = data("transients/h2s_100.csv");
    let (code, _) = run(&["permeation", "schedule", file.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("time_h,conc_ppm\n"));
    let peak = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!((peak / datasets::H2S_100.peak_conc - 1.0).abs() < 0.02, "{peak}");
}

#[test]
fn bad_inputs_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.toml");
    assert_eq!(run(&["sent", "run", missing.to_str().unwrap()]).0, exit::IO);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[geometry]\nload = -5.0\n").unwrap();
    assert_eq!(run(&["sent", "run", bad.to_str().unwrap()]).0, exit::CONFIG);
    let garbled = dir.path().join("t.csv");
    fs::write(&garbled, "seconds,amps\n0,1\n").unwrap();
    assert_eq!(run(&["permeation", "fit", garbled.to_str().unwrap()]).0, exit::CONFIG);
}

#[test]
fn short_sent_run_writes_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[geometry]\nk_applied = 20.0\nhorizon = 0.05\n[environment]\nconstant_ppm = 7.0\n[output]\nframe_every_steps = 4\n").unwrap();
    let out = dir.path().join("out");
    let (code, text) = run(&["sent", "run", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("runout"), "{text}");
    let steps = fs::read_to_string(out.join("steps.csv")).unwrap();
    assert_eq!(steps.lines().next().unwrap(), STEP_HEADER.join(","));
    assert_eq!(
        steps.lines().next().unwrap(),
        "step,time_h,dt_s,load_n,passes,newton_iterations,converged,crack_extent_mm,peak_conc_ppm,surface_conc_ppm,peak_sigma_h_mpa,max_phi_increment,negative_nodes,reaction_ratio,frame"
    );
    assert!(steps.lines().count() > 5);
    for name in ["config.resolved.toml", "version.txt", "summary.json"] {
        assert!(out.join(name).is_file(), "{name}");
    }
    let echo = hefrac::parse_config(&out.join("config.resolved.toml")).unwrap();
    assert_eq!(echo.geometry.horizon, 0.05);
    let mut frames: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|x| x == "vtk")).collect();
    frames.sort();
    assert!(!frames.is_empty());
    let g = Grid::read(frames.last().unwrap()).unwrap();
    let phi = g.point_scalar("phi").unwrap();
    assert!(phi.iter().all(|&p| (0.0..=1.0).contains(&p)));
    assert!(g.cell_scalar("sigma_h").is_some() && g.point_vector("displacement").is_some());
}
