//! Surface-concentration schedules from constant values, knot tables,
//! measured permeation transients or an H₂S fraction interpolated between
//! anchor transients.

use std::path::{Path, PathBuf};

use hefrac_core::datasets::{self, MEMBRANE_AREA, MEMBRANE_THICKNESS};
use hefrac_core::diffusion::EnvSchedule;
use hefrac_core::permeation::{
    build_env_schedule, fit_transient, interpolate_schedules, PermeationFit, PermeationTransient, ScheduleOptions,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header of transient files: seconds since charging began, current density.
pub const TRANSIENT_HEADER: [&str; 2] = ["time_s", "current_a_per_m2"];
/// Header of schedule files.
pub const SCHEDULE_HEADER: [&str; 2] = ["time_h", "conc_ppm"];

/// Exactly one of `h2s`, `constant_ppm`, `schedule` or `transient` selects
/// the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    /// H₂S in the charging gas, %.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h2s: Option<f64>,
    /// Surface concentration held constant, wt ppm.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant_ppm: Option<f64>,
    /// CSV with `time_h,conc_ppm` knots.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<PathBuf>,
    /// CSV with a measured permeation transient.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transient: Option<PathBuf>,
    /// Membrane thickness of `transient`, m.
    #[serde(default = "default_membrane")]
    pub membrane_thickness: f64,
    /// The rise is fitted on the first `fit_hours` of each transient.
    #[serde(default = "default_fit_hours")]
    pub fit_hours: f64,
    /// Diffusivity used to turn currents into concentrations, m²/s.
    #[serde(default = "default_diffusivity")]
    pub diffusivity: f64,
    /// Transients at known fractions for `h2s`; the bundled reconstructions
    /// are used when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anchors: Vec<Anchor>,
    #[serde(default)]
    pub allow_extrapolation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchor {
    pub h2s: f64,
    pub transient: PathBuf,
    #[serde(default = "default_membrane")]
    pub membrane_thickness: f64,
}

fn default_membrane() -> f64 {
    MEMBRANE_THICKNESS
}

fn default_fit_hours() -> f64 {
    20.0
}

fn default_diffusivity() -> f64 {
    datasets::AVERAGE_DIFFUSIVITY
}

impl EnvironmentConfig {
    pub fn h2s(fraction: f64) -> Self {
        Self {
            h2s: Some(fraction),
            ..Self::defaults()
        }
    }

    pub fn constant(ppm: f64) -> Self {
        Self {
            constant_ppm: Some(ppm),
            ..Self::defaults()
        }
    }

    fn defaults() -> Self {
        Self {
            membrane_thickness: default_membrane(),
            fit_hours: default_fit_hours(),
            diffusivity: default_diffusivity(),
            ..Self::default()
        }
    }

    /// Files named by the block, relative paths taken against `base`.
    pub fn files(&self, base: &Path) -> Vec<PathBuf> {
        let mut out: Vec<PathBuf> = self.schedule.iter().chain(&self.transient).map(|p| base.join(p)).collect();
        out.extend(self.anchors.iter().map(|a| base.join(&a.transient)));
        out
    }

    pub fn validate(&self, base: &Path) -> Result<()> {
        let chosen = [
            self.h2s.is_some(),
            self.constant_ppm.is_some(),
            self.schedule.is_some(),
            self.transient.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if chosen != 1 {
            return Err(Error::Invalid(
                "environment: give exactly one of h2s, constant_ppm, schedule or transient".into(),
            ));
        }
        if let Some(c) = self.constant_ppm {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::Invalid(format!("environment.constant_ppm = {c} must be non-negative")));
            }
        }
        if let Some(f) = self.h2s {
            if !(f > 0.0 && f <= 100.0) {
                return Err(Error::Invalid(format!("environment.h2s = {f} must lie in (0, 100]")));
            }
            if !self.anchors.is_empty() && self.anchors.len() < 2 {
                return Err(Error::Invalid("environment.anchors needs at least two transients".into()));
            }
        }
        if !(self.membrane_thickness > 0.0 && self.fit_hours > 0.0 && self.diffusivity > 0.0) {
            return Err(Error::Invalid(
                "environment: membrane_thickness, fit_hours and diffusivity must be positive".into(),
            ));
        }
        for f in self.files(base) {
            if !f.is_file() {
                return Err(Error::Invalid(format!("environment file {} does not exist", f.display())));
            }
        }
        Ok(())
    }

    /// Resolves the block into a schedule covering `horizon` hours.
    pub fn resolve(&self, base: &Path, horizon: f64) -> Result<EnvSchedule> {
        self.validate(base)?;
        let opts = ScheduleOptions {
            diffusivity: self.diffusivity,
            horizon,
            ..ScheduleOptions::default()
        };
        if let Some(c) = self.constant_ppm {
            return Ok(EnvSchedule::constant(c)?);
        }
        if let Some(p) = &self.schedule {
            return read_schedule(&base.join(p));
        }
        if let Some(p) = &self.transient {
            let data = read_transient(&base.join(p), self.membrane_thickness)?;
            return Ok(schedule_from_transient(&data, self.fit_hours, &opts)?.1);
        }
        let fraction = self.h2s.expect("validated");
        let anchors: Vec<(f64, EnvSchedule)> = if self.anchors.is_empty() {
            builtin_anchors(self.fit_hours, &opts)?
        } else {
            self.anchors
                .iter()
                .map(|a| {
                    let data = read_transient(&base.join(&a.transient), a.membrane_thickness)?;
                    Ok((a.h2s, schedule_from_transient(&data, self.fit_hours, &opts)?.1))
                })
                .collect::<Result<_>>()?
        };
        if let Some((_, s)) = anchors.iter().find(|a| a.0 == fraction) {
            return Ok(s.clone());
        }
        let refs: Vec<(f64, &EnvSchedule)> = anchors.iter().map(|(f, s)| (*f, s)).collect();
        Ok(interpolate_schedules(fraction, &refs, self.allow_extrapolation)?)
    }
}

/// Fits the rise over the first `fit_hours` and converts the whole record.
pub fn schedule_from_transient(
    data: &PermeationTransient,
    fit_hours: f64,
    opts: &ScheduleOptions,
) -> Result<(PermeationFit, EnvSchedule)> {
    let fit = fit_transient(&data.truncated(fit_hours * 3600.0))?;
    let schedule = build_env_schedule(data, &fit, opts)?;
    Ok((fit, schedule))
}

/// Schedules of the bundled reconstructed transients (3, 10 and 100 % H₂S).
pub fn builtin_anchors(fit_hours: f64, opts: &ScheduleOptions) -> Result<Vec<(f64, EnvSchedule)>> {
    datasets::ALL
        .iter()
        .map(|s| {
            let data = s.transient(opts.horizon.max(fit_hours), 600.0);
            Ok((s.h2s, schedule_from_transient(&data, fit_hours, opts)?.1))
        })
        .collect()
}

pub fn read_transient(path: &Path, thickness: f64) -> Result<PermeationTransient> {
    let rows = read_pairs(path, &TRANSIENT_HEADER)?;
    let (times, current) = rows.into_iter().unzip();
    let label = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let data = PermeationTransient {
        times,
        current,
        thickness,
        area: MEMBRANE_AREA,
        label,
    };
    data.validate().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(data)
}

pub fn write_transient(path: &Path, data: &PermeationTransient) -> Result<()> {
    let rows: Vec<(f64, f64)> = data.times.iter().copied().zip(data.current.iter().copied()).collect();
    write_pairs(path, &TRANSIENT_HEADER, &rows)
}

pub fn read_schedule(path: &Path) -> Result<EnvSchedule> {
    let knots = read_pairs(path, &SCHEDULE_HEADER)?;
    EnvSchedule::new(knots).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_schedule(path: &Path, schedule: &EnvSchedule) -> Result<()> {
    write_pairs(path, &SCHEDULE_HEADER, schedule.knots())
}

fn read_pairs(path: &Path, header: &[&str; 2]) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let found = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    if found.len() != 2 || found.iter().zip(header).any(|(a, b)| a != *b) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("expected header {}, found {}", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize::<(f64, f64)>() {
        out.push(rec.map_err(|e| Error::csv(path, e))?);
    }
    Ok(out)
}

fn write_pairs(path: &Path, header: &[&str; 2], rows: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for (a, b) in rows {
        w.serialize((a, b)).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
