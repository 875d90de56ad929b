//! Command-line front end. [`main_with`] is the whole program minus process
//! exit, so it can be driven from tests.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hefrac_core::fem::Mesh;
use hefrac_core::permeation::{subsurface_concentration, ScheduleOptions};
use hefrac_core::sent::StationaryMode;

use crate::campaign::{self, parse_manifest};
use crate::config::{parse_config, Preset, RunConfig};
use crate::environment::{read_transient, schedule_from_transient, write_schedule};
use crate::error::{exit, Error, Result};
use crate::output::{create_dir, write_json};
use crate::run::{run_sent, run_stationary};
use crate::vtk::Grid;

#[derive(Debug, Parser)]
#[command(name = "hefrac", version, about = "Virtual SENT tests of hydrogen-assisted fracture", arg_required_else_help = true)]
pub struct Cli {
    /// Worker threads for campaigns (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Mesh preset, overriding the configuration.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Permeation transients.
    #[command(subcommand)]
    Permeation(PermeationCmd),
    /// Mesh inspection.
    #[command(subcommand)]
    Mesh(MeshCmd),
    /// Virtual SENT tests.
    #[command(subcommand)]
    Sent(SentCmd),
    /// Deformation-diffusion study of the initial crack without fracture.
    Stationary {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Constant)]
        mode: ModeArg,
        /// Times (h) at which ligament profiles are reported.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 10.0, 24.0])]
        profiles: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    /// Surface held at the schedule's peak.
    Constant,
    /// Surface follows the schedule.
    Scheduled,
}

#[derive(Debug, Args)]
pub struct TransientArgs {
    /// CSV with `time_s,current_a_per_m2`.
    pub file: PathBuf,
    /// Membrane thickness, m.
    #[arg(long, default_value_t = hefrac_core::datasets::MEMBRANE_THICKNESS)]
    pub thickness: f64,
    /// Hours of the rise used in the fit.
    #[arg(long, default_value_t = 20.0)]
    pub fit_hours: f64,
}

#[derive(Debug, Subcommand)]
pub enum PermeationCmd {
    /// Fits diffusivity and steady current to the rise of a transient.
    Fit(TransientArgs),
    /// Converts a transient into a surface-concentration schedule.
    Schedule {
        #[command(flatten)]
        transient: TransientArgs,
        /// Diffusivity for C0 = (j - j0) l / (F D), m²/s.
        #[arg(long, default_value_t = hefrac_core::datasets::AVERAGE_DIFFUSIVITY)]
        diffusivity: f64,
        #[arg(long, default_value_t = 720.0)]
        horizon: f64,
        /// Schedule CSV; printed when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum MeshCmd {
    /// Builds the configured mesh, prints its statistics and writes mesh.vtk.
    Preview { config: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum SentCmd {
    /// One constant-load test.
    Run { config: PathBuf },
    /// All load levels of a manifest in parallel.
    Campaign { manifest: PathBuf },
    /// Bisection for the threshold K_I.
    Kth {
        config: PathBuf,
        #[arg(long)]
        k_min: f64,
        #[arg(long)]
        k_max: f64,
        /// Bracket width at which bisection stops, MPa√m.
        #[arg(long, default_value_t = 1.0)]
        tol: f64,
        /// Evenly spaced K levels tried before bisecting.
        #[arg(long, default_value_t = 2)]
        grid_points: usize,
    },
}

/// Parses `args` (program name first), runs the command and returns the exit
/// status. Normal output goes to `out`, diagnostics to stderr.
pub fn main_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                eprint!("{text}");
            }
            return if code == 0 { exit::OK } else { exit::USAGE };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(&cli, out) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli, path: &Path) -> Result<RunConfig> {
    let mut cfg = parse_config(path)?;
    if let Some(p) = cli.preset {
        cfg.mesh.preset = p;
    }
    if let Some(d) = &cli.output_dir {
        cfg.output.directory = d.clone();
    }
    Ok(cfg)
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Invalid(format!("cannot start {threads:?} worker threads: {e}")))
}

fn w(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io(Path::new("<stdout>"), e))
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Permeation(PermeationCmd::Fit(t)) => {
            let data = read_transient(&t.file, t.thickness)?;
            let fit = hefrac_core::permeation::fit_transient(&data.truncated(t.fit_hours * 3600.0))?;
            let c0 = subsurface_concentration(fit.j_inf - fit.j0, data.thickness, fit.diffusivity)?;
            w(
                out,
                &format!(
                    "diffusivity_m2_s = {:e}\nj_inf_a_m2 = {:e}\nj0_a_m2 = {:e}\nr_squared = {:.6}\nsubsurface_conc_ppm = {:.4}\n",
                    fit.diffusivity, fit.j_inf, fit.j0, fit.r_squared, c0
                ),
            )
        }
        Command::Permeation(PermeationCmd::Schedule {
            transient: t,
            diffusivity,
            horizon,
            out: file,
        }) => {
            let data = read_transient(&t.file, t.thickness)?;
            let opts = ScheduleOptions {
                diffusivity: *diffusivity,
                horizon: *horizon,
                ..ScheduleOptions::default()
            };
            let (_, schedule) = schedule_from_transient(&data, t.fit_hours, &opts)?;
            match file {
                Some(p) => write_schedule(p, &schedule),
                None => {
                    let mut text = String::from("time_h,conc_ppm\n");
                    for (t, c) in schedule.knots() {
                        text.push_str(&format!("{t},{c}\n"));
                    }
                    w(out, &text)
                }
            }
        }
        Command::Mesh(MeshCmd::Preview { config }) => {
            let cfg = load_config(cli, config)?;
            let mesh = cfg.build_mesh()?;
            let dir = &cfg.output.directory;
            create_dir(dir)?;
            preview_grid(&mesh).write(&dir.join("mesh.vtk"))?;
            let stats = serde_json::to_string_pretty(&mesh.stats()).unwrap_or_default();
            w(out, &format!("{stats}\n"))
        }
        Command::Sent(SentCmd::Run { config }) => {
            let cfg = load_config(cli, config)?;
            let mesh = cfg.build_mesh()?;
            let s = run_sent(&cfg, &mesh, &cfg.output.directory)?;
            let r = &s.record;
            w(
                out,
                &format!(
                    "K_I = {:.3} MPa sqrt(m): {} at {:.3} h after {} steps ({:.1} s)\n",
                    r.k_applied,
                    r.outcome.label(),
                    r.outcome.hours(),
                    r.steps,
                    s.wall_seconds
                ),
            )
        }
        Command::Sent(SentCmd::Campaign { manifest }) => {
            let (m, mut cfg) = parse_manifest(manifest)?;
            if let Some(p) = cli.preset {
                cfg.mesh.preset = p;
            }
            let dir = cli.output_dir.clone().unwrap_or_else(|| cfg.output.directory.clone());
            let base = manifest.parent().unwrap_or(Path::new("."));
            let jobs = campaign::plan(&m, &cfg, base)?;
            create_dir(&dir)?;
            cfg.write_echo(&dir)?;
            let mesh_for = campaign::preset_mesh(&cfg);
            let results = pool(cli.threads)?.install(|| campaign::execute(&jobs, &mesh_for))?;
            let text = campaign::write_campaign(&dir, &results)?;
            w(out, &text)
        }
        Command::Sent(SentCmd::Kth {
            config,
            k_min,
            k_max,
            tol,
            grid_points,
        }) => {
            let cfg = load_config(cli, config)?;
            if *grid_points < 2 || !(k_min < k_max) {
                return Err(Error::Invalid("kth needs k_min < k_max and at least two grid points".into()));
            }
            let n = *grid_points;
            let grid: Vec<f64> = (0..n).map(|i| k_min + (k_max - k_min) * i as f64 / (n - 1) as f64).collect();
            let mesh: Mesh = cfg.build_mesh()?;
            let bracket = pool(cli.threads)?.install(|| campaign::kth_search(&cfg, &mesh, &grid, *tol))?;
            let dir = &cfg.output.directory;
            create_dir(dir)?;
            cfg.write_echo(dir)?;
            write_json(&dir.join("kth.json"), &bracket)?;
            let results: Vec<campaign::JobResult> = bracket
                .records
                .iter()
                .map(|r| campaign::JobResult {
                    environment: "config".into(),
                    record: r.clone(),
                })
                .collect();
            campaign::write_results(&dir.join("results.csv"), &results)?;
            w(out, &format!("K_th in [{:.3}, {:.3}] MPa sqrt(m)\n", bracket.runout, bracket.failed))
        }
        Command::Stationary { config, mode, profiles } => {
            let cfg = load_config(cli, config)?;
            let mesh = cfg.build_mesh()?;
            let mode = match mode {
                ModeArg::Constant => StationaryMode::ConstantMax,
                ModeArg::Scheduled => StationaryMode::Scheduled,
            };
            let s = run_stationary(&cfg, &mesh, mode, profiles, &cfg.output.directory)?;
            let t90 = s.report.t90.map_or_else(|| "not reached".to_string(), |t| format!("{t:.2} h"));
            w(
                out,
                &format!(
                    "K_I = {:.3} MPa sqrt(m)\nsteady peak = {:.4} ppm (enrichment {:.3})\nt90 = {t90}\npeak at {:.2} h\n",
                    s.k_applied, s.report.steady_peak, s.enrichment, s.report.peak_time
                ),
            )
        }
    }
}

/// Mesh with its boundary sets and refined band marked.
fn preview_grid(mesh: &Mesh) -> Grid {
    let mut sets = vec![0.0; mesh.n_nodes()];
    let s = &mesh.sets;
    for (code, nodes) in [(1.0, &s.ligament), (2.0, &s.crack_face), (3.0, &s.top), (4.0, &s.exposed)] {
        for &n in nodes {
            if sets[n] == 0.0 {
                sets[n] = code;
            }
        }
    }
    let mut band = vec![0.0; mesh.n_elements()];
    for e in mesh.band_elements() {
        band[e] = 1.0;
    }
    Grid {
        title: "hefrac mesh".into(),
        point_scalars: vec![("boundary_set".into(), sets)],
        cell_scalars: vec![("band".into(), band)],
        ..Grid::from_mesh(mesh)
    }
}
