//! TOML run configuration. Unknown keys are rejected everywhere; omitted
//! blocks take their defaults.

use std::fs;
use std::path::{Path, PathBuf};

use hefrac_core::coupling::StepControls;
use hefrac_core::diffusion::EnvSchedule;
use hefrac_core::fem::{build_sent_mesh, Mesh, SentMeshSpec};
use hefrac_core::sent::{applied_k, load_for_k, SentConfig};
use hefrac_core::MaterialParams;
use serde::{Deserialize, Serialize};

use crate::environment::EnvironmentConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Band of ℓ/5 elements over the first millimetre of ligament.
    #[default]
    Desk,
    /// Whole ligament refined.
    Paper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub width: f64,
    pub thickness: f64,
    pub crack_length: f64,
    pub gauge_length: f64,
    /// Applied load, N. Give this or `k_applied`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load: Option<f64>,
    /// Applied K_I, MPa√m, converted to a load at the given geometry.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_applied: Option<f64>,
    /// Test duration, h.
    pub horizon: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            width: 7.0,
            thickness: 7.0,
            crack_length: 2.45,
            gauge_length: 25.4,
            load: None,
            k_applied: None,
            horizon: 720.0,
        }
    }
}

impl GeometryConfig {
    /// Load in N, from `load` or `k_applied`.
    pub fn resolved_load(&self) -> Result<f64> {
        match (self.load, self.k_applied) {
            (Some(p), None) => Ok(p),
            (None, Some(k)) => Ok(load_for_k(k, self.thickness, self.width, self.crack_length)?),
            (Some(_), Some(_)) => Err(Error::Invalid("geometry: give load or k_applied, not both".into())),
            (None, None) => Err(Error::Invalid("geometry: neither load nor k_applied is set".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub preset: Preset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Write a field frame every this many accepted steps (0: never).
    pub frame_every_steps: usize,
    /// Write a field frame whenever this much simulated time has passed, h
    /// (0: never).
    pub frame_every_hours: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("runs/sent"),
            frame_every_steps: 0,
            frame_every_hours: 24.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub material: MaterialParams,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub solver: StepControls,
    #[serde(default = "default_environment")]
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_environment() -> EnvironmentConfig {
    EnvironmentConfig::h2s(100.0)
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            material: MaterialParams::default(),
            geometry: GeometryConfig::default(),
            solver: StepControls::default(),
            environment: default_environment(),
            mesh: MeshConfig::default(),
            output: OutputConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_str(&text).map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        message,
    })?;
    cfg.base_dir = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    cfg.validate()?;
    Ok(cfg)
}

/// Parses without validation; the message carries the offending key and line.
pub fn parse_str(text: &str) -> std::result::Result<RunConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

impl RunConfig {
    /// Checks every block; environment files must exist.
    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        self.solver.validate()?;
        let g = &self.geometry;
        if let Some(k) = g.k_applied {
            if !(k > 0.0) {
                return Err(Error::Invalid(format!("geometry.k_applied = {k} must be positive")));
            }
        }
        if !(g.horizon > 0.0) {
            return Err(Error::Invalid(format!("geometry.horizon = {} must be positive", g.horizon)));
        }
        if self.output.frame_every_hours < 0.0 {
            return Err(Error::Invalid("output.frame_every_hours must not be negative".into()));
        }
        self.environment.validate(&self.base_dir)?;
        // a placeholder load when the command supplies its own
        let load = if g.load.is_some() || g.k_applied.is_some() { g.resolved_load()? } else { 1.0 };
        self.sent_config_with(EnvSchedule::constant(0.0)?, load).validate()?;
        Ok(())
    }

    /// Test description around an already resolved schedule. The load is
    /// the configured one, or 1 N for callers that set their own.
    pub fn sent_config_for(&self, environment: EnvSchedule) -> SentConfig {
        let load = self.geometry.resolved_load().unwrap_or(1.0);
        self.sent_config_with(environment, load)
    }

    fn sent_config_with(&self, environment: EnvSchedule, load: f64) -> SentConfig {
        let g = &self.geometry;
        SentConfig {
            width: g.width,
            thickness: g.thickness,
            crack_length: g.crack_length,
            gauge_length: g.gauge_length,
            load,
            horizon: g.horizon,
            environment,
            params: self.material,
            controls: self.solver,
        }
    }

    /// Test description with the environment resolved.
    pub fn sent_config(&self) -> Result<SentConfig> {
        let load = self.geometry.resolved_load()?;
        let env = self.environment.resolve(&self.base_dir, self.geometry.horizon)?;
        let cfg = self.sent_config_with(env, load);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn mesh_spec(&self) -> SentMeshSpec {
        let g = &self.geometry;
        let half = 0.5 * g.gauge_length;
        let ell = self.material.length_scale;
        match self.mesh.preset {
            Preset::Desk => SentMeshSpec::desk(g.width, half, g.crack_length, ell),
            Preset::Paper => SentMeshSpec::paper(g.width, half, g.crack_length, ell),
        }
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        Ok(build_sent_mesh(&self.mesh_spec())?)
    }

    /// Applied K_I of the resolved load, MPa√m.
    pub fn applied_k(&self) -> Result<f64> {
        let g = &self.geometry;
        Ok(applied_k(self.geometry.resolved_load()?, g.thickness, g.width, g.crack_length)?)
    }

    /// Canonical TOML of every resolved value. The load is written in N.
    pub fn echo(&self) -> Result<String> {
        let mut resolved = self.clone();
        if resolved.geometry.load.is_some() || resolved.geometry.k_applied.is_some() {
            resolved.geometry.load = Some(self.geometry.resolved_load()?);
            resolved.geometry.k_applied = None;
        }
        let body = toml::to_string_pretty(&resolved).map_err(|e| Error::Invalid(format!("cannot serialise configuration: {e}")))?;
        let mut head = format!("# hefrac {} resolved configuration\n", env!("CARGO_PKG_VERSION"));
        if let Ok(k) = self.applied_k() {
            head.push_str(&format!("# applied K_I = {k:.6} MPa sqrt(m)\n"));
        }
        Ok(head + &body)
    }

    /// Writes the echo next to the outputs.
    pub fn write_echo(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("config.resolved.toml");
        fs::write(&path, self.echo()?).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
