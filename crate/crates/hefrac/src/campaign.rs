//! Load-level campaigns over environments and crack lengths, run in a
//! bounded worker pool, and K_th searches.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hefrac_core::fem::{build_sent_mesh, Mesh};
use hefrac_core::sent::{find_kth, load_for_k, run_virtual_test, CampaignResult, KthBracket, Outcome, SentConfig, TestRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{parse_config, RunConfig};
use crate::environment::EnvironmentConfig;
use crate::error::{Error, Result};
use crate::output::{create_dir, write_json};

/// Columns of campaign and threshold-search result tables.
pub const RESULT_HEADER: [&str; 10] = [
    "environment",
    "load_n",
    "crack_length_mm",
    "k_applied",
    "outcome",
    "time_h",
    "steps",
    "peak_conc_ppm",
    "final_extent_mm",
    "detail",
];

/// Campaign manifest (TOML). Either `loads` or `k_values` lists the levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// Base run configuration, relative to the manifest.
    pub config: PathBuf,
    #[serde(default)]
    pub loads: Vec<f64>,
    #[serde(default)]
    pub k_values: Vec<f64>,
    /// Defaults to the base configuration's a0.
    #[serde(default)]
    pub crack_lengths: Vec<f64>,
    /// Named environments; the base configuration's is used when empty.
    #[serde(default)]
    pub environments: BTreeMap<String, EnvironmentConfig>,
}

pub fn parse_manifest(path: &Path) -> Result<(Manifest, RunConfig)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let cfg = parse_config(&base.join(&manifest.config))?;
    if manifest.loads.is_empty() == manifest.k_values.is_empty() {
        return Err(Error::Invalid("manifest: give exactly one of loads or k_values".into()));
    }
    if manifest.loads.iter().chain(&manifest.k_values).any(|&v| !(v > 0.0)) {
        return Err(Error::Invalid("manifest: load levels must be positive".into()));
    }
    for (name, env) in &manifest.environments {
        env.validate(base).map_err(|e| Error::Invalid(format!("environment '{name}': {e}")))?;
    }
    Ok((manifest, cfg))
}

/// One planned test.
#[derive(Debug, Clone)]
pub struct Job {
    pub environment: String,
    pub config: SentConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobResult {
    pub environment: String,
    pub record: TestRecord,
}

/// Expands the manifest into tests, resolving each environment once.
pub fn plan(manifest: &Manifest, cfg: &RunConfig, manifest_dir: &Path) -> Result<Vec<Job>> {
    let mut envs: Vec<(String, EnvironmentConfig, PathBuf)> = manifest
        .environments
        .iter()
        .map(|(n, e)| (n.clone(), e.clone(), manifest_dir.to_path_buf()))
        .collect();
    if envs.is_empty() {
        envs.push(("base".into(), cfg.environment.clone(), cfg.base_dir.clone()));
    }
    let crack_lengths = if manifest.crack_lengths.is_empty() {
        vec![cfg.geometry.crack_length]
    } else {
        manifest.crack_lengths.clone()
    };
    let mut jobs = Vec::new();
    for (name, env, dir) in envs {
        let schedule = env.resolve(&dir, cfg.geometry.horizon)?;
        for &a0 in &crack_lengths {
            let levels: Vec<f64> = if manifest.loads.is_empty() {
                manifest
                    .k_values
                    .iter()
                    .map(|&k| load_for_k(k, cfg.geometry.thickness, cfg.geometry.width, a0))
                    .collect::<hefrac_core::Result<_>>()?
            } else {
                manifest.loads.clone()
            };
            for load in levels {
                let mut sent = cfg.sent_config_for(schedule.clone());
                sent.crack_length = a0;
                sent.load = load;
                sent.validate()?;
                jobs.push(Job {
                    environment: name.clone(),
                    config: sent,
                });
            }
        }
    }
    Ok(jobs)
}

/// Runs every job on the current rayon pool; meshes are shared per a0.
pub fn execute(jobs: &[Job], mesh_for: &(dyn Fn(&SentConfig) -> Result<Mesh> + Sync)) -> Result<Vec<JobResult>> {
    let mut meshes: Vec<(f64, Mesh)> = Vec::new();
    for j in jobs {
        let a0 = j.config.crack_length;
        if !meshes.iter().any(|m| m.0 == a0) {
            meshes.push((a0, mesh_for(&j.config)?));
        }
    }
    jobs.par_iter()
        .map(|j| {
            let mesh = &meshes.iter().find(|m| m.0 == j.config.crack_length).expect("mesh built above").1;
            log::info!("{}: P = {:.1} N, a0 = {} mm", j.environment, j.config.load, j.config.crack_length);
            let record = run_virtual_test(mesh, &j.config, |_, _| Ok(()))?;
            log::info!("{}: K = {:.3} -> {} at {:.2} h", j.environment, record.k_applied, record.outcome.label(), record.outcome.hours());
            Ok(JobResult {
                environment: j.environment.clone(),
                record,
            })
        })
        .collect()
}

fn detail(o: &Outcome) -> String {
    match o {
        Outcome::Failed { mode, .. } => mode.clone(),
        Outcome::Runout { .. } => String::new(),
        Outcome::Inconclusive { reason, .. } => reason.clone(),
    }
}

pub fn write_results(path: &Path, results: &[JobResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(RESULT_HEADER).map_err(|e| Error::csv(path, e))?;
    for r in results {
        let rec = &r.record;
        w.write_record([
            r.environment.clone(),
            rec.load.to_string(),
            rec.crack_length.to_string(),
            rec.k_applied.to_string(),
            rec.outcome.label().to_string(),
            rec.outcome.hours().to_string(),
            rec.steps.to_string(),
            rec.peak_conc.to_string(),
            rec.final_extent.to_string(),
            detail(&rec.outcome),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-environment results grouped for reporting.
pub fn by_environment(results: &[JobResult]) -> BTreeMap<String, CampaignResult> {
    let mut groups: BTreeMap<String, Vec<TestRecord>> = BTreeMap::new();
    for r in results {
        groups.entry(r.environment.clone()).or_default().push(r.record.clone());
    }
    groups.into_iter().map(|(k, v)| (k, CampaignResult::new(v))).collect()
}

/// Plain-text report: time to failure against K_I per environment, the
/// K_th interval and any monotonicity violations.
pub fn report(groups: &BTreeMap<String, CampaignResult>) -> String {
    let mut s = String::new();
    for (name, c) in groups {
        let _ = writeln!(s, "environment {name}");
        let _ = writeln!(s, "  {:>10} {:>10} {:>13} {:>10}", "K_I", "load_N", "outcome", "time_h");
        for r in &c.records {
            let _ = writeln!(
                s,
                "  {:>10.3} {:>10.1} {:>13} {:>10.2}",
                r.k_applied,
                r.load,
                r.outcome.label(),
                r.outcome.hours()
            );
        }
        match c.kth {
            Some((lo, hi)) => {
                let _ = writeln!(s, "  K_th in [{lo:.3}, {hi:.3}] MPa sqrt(m)");
            }
            None => {
                let _ = writeln!(s, "  K_th not bracketed");
            }
        }
        for (k1, k2) in c.severity_violations() {
            let _ = writeln!(s, "  non-monotone: failure at K = {k2:.3} later than at K = {k1:.3}");
        }
    }
    s
}

/// Writes `results.csv`, `summary.json` and `report.txt` under `dir`.
pub fn write_campaign(dir: &Path, results: &[JobResult]) -> Result<String> {
    create_dir(dir)?;
    write_results(&dir.join("results.csv"), results)?;
    let groups = by_environment(results);
    write_json(&dir.join("summary.json"), &groups)?;
    let text = report(&groups);
    let path = dir.join("report.txt");
    fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    Ok(text)
}

/// Threshold search for the configured environment. `grid` lists K levels
/// (MPa√m) evaluated before bisection.
pub fn kth_search(cfg: &RunConfig, mesh: &Mesh, grid: &[f64], tolerance: f64) -> Result<KthBracket> {
    let schedule = cfg.environment.resolve(&cfg.base_dir, cfg.geometry.horizon)?;
    let base = cfg.sent_config_for(schedule);
    let bracket = find_kth(grid, tolerance, |k| {
        let load = load_for_k(k, base.thickness, base.width, base.crack_length)?;
        let cfg = SentConfig { load, ..base.clone() };
        let record = run_virtual_test(mesh, &cfg, |_, _| Ok(()))?;
        log::info!("K = {k:.3}: {} at {:.2} h", record.outcome.label(), record.outcome.hours());
        Ok(record)
    })?;
    Ok(bracket)
}

/// Mesh of the run configuration's preset for another a0.
pub fn preset_mesh(cfg: &RunConfig) -> impl Fn(&SentConfig) -> Result<Mesh> + Sync + '_ {
    move |sent| {
        let mut spec = cfg.mesh_spec();
        spec.crack_length = sent.crack_length;
        Ok(build_sent_mesh(&spec)?)
    }
}
