//! Single virtual tests and stationary-crack studies with their run
//! directories.

use std::path::Path;
use std::time::Instant;

use hefrac_core::coupling::SimState;
use hefrac_core::fem::{Mesh, MeshStats};
use hefrac_core::sent::{run_virtual_test, stationary_crack_study, StationaryMode, StationaryReport, TestRecord};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::output::{create_dir, write_json, RunWriter};

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub record: TestRecord,
    pub mesh: MeshStats,
    pub frames: usize,
    pub wall_seconds: f64,
}

/// Runs the configured test, writing everything under `dir`. The field at
/// the last accepted step is always written as a frame.
pub fn run_sent(cfg: &RunConfig, mesh: &Mesh, dir: &Path) -> Result<RunSummary> {
    let sent = cfg.sent_config()?;
    create_dir(dir)?;
    cfg.write_echo(dir)?;
    let mut writer = RunWriter::create(dir, &cfg.output)?;
    let start = Instant::now();
    let mut last: Option<SimState> = None;
    let mut io_error = None;
    let record = run_virtual_test(mesh, &sent, |state, info| {
        if let Err(e) = writer.record(mesh, state, info, &cfg.material) {
            io_error = Some(e);
            return Err(hefrac_core::Error::State("output failed".into()));
        }
        last = Some(state.clone());
        Ok(())
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    let record = record?;
    if let Some(state) = &last {
        writer.ensure_frame(mesh, state, &cfg.material)?;
    }
    let summary = RunSummary {
        record,
        mesh: mesh.stats(),
        frames: writer.frames().len(),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarySummary {
    pub k_applied: f64,
    pub mode: StationaryMode,
    pub enrichment: f64,
    pub report: StationaryReport,
    pub wall_seconds: f64,
}

/// Stationary-crack study with history and profile tables under `dir`.
pub fn run_stationary(cfg: &RunConfig, mesh: &Mesh, mode: StationaryMode, profile_hours: &[f64], dir: &Path) -> Result<StationarySummary> {
    let sent = cfg.sent_config()?;
    create_dir(dir)?;
    cfg.write_echo(dir)?;
    let start = Instant::now();
    let report = stationary_crack_study(mesh, &sent, mode, profile_hours)?;
    let summary = StationarySummary {
        k_applied: sent.applied_k()?,
        mode,
        enrichment: report.enrichment(),
        wall_seconds: start.elapsed().as_secs_f64(),
        report,
    };
    let path = dir.join("history.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    w.write_record(["time_h", "peak_conc_ppm", "surface_conc_ppm"]).map_err(|e| Error::csv(&path, e))?;
    for row in &summary.report.history {
        w.serialize(row).map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let path = dir.join("profiles.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    w.write_record(["time_h", "x_mm", "conc_ppm"]).map_err(|e| Error::csv(&path, e))?;
    for (t, profile) in &summary.report.profiles {
        for (x, c) in profile {
            w.serialize((t, x, c)).map_err(|e| Error::csv(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}
