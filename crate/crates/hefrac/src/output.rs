//! Run directories: resolved-config echo, version stamp, step log, field
//! frames and a JSON summary.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use hefrac_core::coupling::{SimState, StepInfo};
use hefrac_core::fem::Mesh;
use hefrac_core::MaterialParams;
use serde::Serialize;

use crate::config::OutputConfig;
use crate::error::{Error, Result};
use crate::vtk::{frame_grid, frame_path};

/// Columns of `steps.csv`.
pub const STEP_HEADER: [&str; 15] = [
    "step",
    "time_h",
    "dt_s",
    "load_n",
    "passes",
    "newton_iterations",
    "converged",
    "crack_extent_mm",
    "peak_conc_ppm",
    "surface_conc_ppm",
    "peak_sigma_h_mpa",
    "max_phi_increment",
    "negative_nodes",
    "reaction_ratio",
    "frame",
];

pub fn version_stamp() -> String {
    format!(
        "hefrac {}\nhefrac-core {}\nrustc target {}-{}\n",
        env!("CARGO_PKG_VERSION"),
        env!("CARGO_PKG_VERSION"),
        std::env::consts::ARCH,
        std::env::consts::OS
    )
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(format!("cannot serialise {}: {e}", path.display())))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Frame cadence and the append-only step log of one run.
pub struct RunWriter {
    dir: PathBuf,
    log: csv::Writer<File>,
    every_steps: usize,
    every_seconds: f64,
    last_frame_time: f64,
    last_frame_step: Option<usize>,
    frames: Vec<PathBuf>,
}

impl RunWriter {
    /// Creates `dir` with the version stamp and an empty step log.
    pub fn create(dir: &Path, cadence: &OutputConfig) -> Result<Self> {
        create_dir(dir)?;
        let stamp = dir.join("version.txt");
        fs::write(&stamp, version_stamp()).map_err(|e| Error::io(&stamp, e))?;
        let path = dir.join("steps.csv");
        let mut log = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        log.write_record(STEP_HEADER).map_err(|e| Error::csv(&path, e))?;
        log.flush().map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            log,
            every_steps: cadence.frame_every_steps,
            every_seconds: cadence.frame_every_hours * 3600.0,
            last_frame_time: 0.0,
            last_frame_step: None,
            frames: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn frames(&self) -> &[PathBuf] {
        &self.frames
    }

    fn due(&self, info: &StepInfo) -> bool {
        let by_step = self.every_steps > 0 && info.step.is_multiple_of(self.every_steps);
        let by_time = self.every_seconds > 0.0 && info.time - self.last_frame_time >= self.every_seconds - 1e-9;
        by_step || by_time
    }

    /// Logs an accepted step and writes a frame when the cadence asks for one.
    pub fn record(&mut self, mesh: &Mesh, state: &SimState, info: &StepInfo, params: &MaterialParams) -> Result<()> {
        let frame = if self.due(info) {
            self.write_frame(mesh, state, params)?;
            self.frames.len().to_string()
        } else {
            String::new()
        };
        let row = [
            info.step.to_string(),
            (info.time / 3600.0).to_string(),
            info.dt.to_string(),
            info.load.to_string(),
            info.passes.to_string(),
            info.newton_iterations.to_string(),
            info.converged.to_string(),
            info.crack_extent.to_string(),
            info.peak_conc.to_string(),
            info.surface_conc.to_string(),
            info.peak_sigma_h.to_string(),
            info.max_phi_increment.to_string(),
            info.negative_nodes.to_string(),
            info.reaction_ratio.to_string(),
            frame,
        ];
        let path = self.dir.join("steps.csv");
        self.log.write_record(&row).map_err(|e| Error::csv(&path, e))?;
        self.log.flush().map_err(|e| Error::io(&path, e))
    }

    /// Writes the next frame; indices start at 1 and increase by one.
    pub fn write_frame(&mut self, mesh: &Mesh, state: &SimState, params: &MaterialParams) -> Result<PathBuf> {
        let path = frame_path(&self.dir, self.frames.len() + 1, state.time);
        frame_grid(mesh, state, params).write(&path)?;
        self.last_frame_time = state.time;
        self.last_frame_step = Some(state.step);
        self.frames.push(path.clone());
        Ok(path)
    }

    /// Writes a frame of `state` unless one exists already.
    pub fn ensure_frame(&mut self, mesh: &Mesh, state: &SimState, params: &MaterialParams) -> Result<()> {
        if self.last_frame_step != Some(state.step) {
            self.write_frame(mesh, state, params)?;
        }
        Ok(())
    }
}
