//! Single-edge notch tension bookkeeping: applied stress intensity, virtual
//! constant-load tests, K_th bracketing and the stationary-crack study.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::sqrt;

use crate::coupling::{SimState, Simulation, StepControls, StepInfo, Termination};
use crate::diffusion::{molar_to_ppm, EnvSchedule};
use crate::error::{Error, Result};
use crate::fem::Mesh;
use crate::material::MaterialParams;

const COEFFS: [f64; 5] = [8.8764, -31.762, 87.038, -99.18, 43.367];

/// Polynomial geometry factor f(a/W) of the clamped SENT specimen.
pub fn geometry_factor(a_over_w: f64) -> Result<f64> {
    if !(a_over_w > 0.0 && a_over_w < 1.0) {
        return Err(Error::Range {
            what: "a/W",
            value: a_over_w,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if !(0.1..=0.6).contains(&a_over_w) {
        log::warn!("a/W = {a_over_w} is outside the calibrated range 0.1 to 0.6");
    }
    let x = a_over_w;
    Ok(COEFFS.iter().rev().fold(0.0, |acc, c| acc * x + c) * x)
}

/// K_I = P / (B √W) f(a/W), in MPa√m for P in N and lengths in mm.
pub fn applied_k(load: f64, thickness: f64, width: f64, crack_length: f64) -> Result<f64> {
    let f = geometry_factor(crack_length / width)?;
    Ok(load / (thickness * sqrt(width)) * f / sqrt(1000.0))
}

/// Load (N) giving `k` MPa√m.
pub fn load_for_k(k: f64, thickness: f64, width: f64, crack_length: f64) -> Result<f64> {
    let unit = applied_k(1.0, thickness, width, crack_length)?;
    Ok(k / unit)
}

/// One virtual test.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SentConfig {
    /// Width W, mm.
    pub width: f64,
    /// Thickness B, mm.
    pub thickness: f64,
    /// Initial crack length a0, mm.
    pub crack_length: f64,
    /// Gauge length, mm; the model spans half of it.
    pub gauge_length: f64,
    /// Applied load P, N.
    pub load: f64,
    /// Test duration, h.
    pub horizon: f64,
    pub environment: EnvSchedule,
    pub params: MaterialParams,
    pub controls: StepControls,
}

impl SentConfig {
    /// 7 × 7 mm specimen, a0/W = 0.35, 25.4 mm gauge, 720 h.
    pub fn standard(load: f64, environment: EnvSchedule) -> Self {
        Self {
            width: 7.0,
            thickness: 7.0,
            crack_length: 2.45,
            gauge_length: 25.4,
            load,
            horizon: 720.0,
            environment,
            params: MaterialParams::default(),
            controls: StepControls::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.thickness > 0.0 && self.gauge_length > 0.0) {
            return Err(Error::Config("specimen dimensions must be positive".into()));
        }
        let r = self.crack_length / self.width;
        if !(0.2..=0.5).contains(&r) {
            return Err(Error::Range {
                what: "a0/W",
                value: r,
                lo: 0.2,
                hi: 0.5,
            });
        }
        if !(0.3..=0.4).contains(&r) {
            log::warn!("a0/W = {r:.3} is outside the tested band 0.3 to 0.4");
        }
        if !(self.load > 0.0) {
            return Err(Error::Config(format!("load {} must be positive", self.load)));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Config(format!("horizon {} must be positive", self.horizon)));
        }
        self.params.validate()?;
        self.controls.validate()
    }

    pub fn half_height(&self) -> f64 {
        0.5 * self.gauge_length
    }

    pub fn applied_k(&self) -> Result<f64> {
        applied_k(self.load, self.thickness, self.width, self.crack_length)
    }

    /// Checks that `mesh` models this specimen.
    fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        let g = mesh
            .sent
            .ok_or_else(|| Error::Config("mesh carries no SENT geometry".into()))?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        if !close(g.width, self.width) || !close(g.crack_length, self.crack_length) || !close(g.half_height, self.half_height()) {
            return Err(Error::Config(format!(
                "mesh geometry {g:?} does not match W = {}, a0 = {}, half height = {}",
                self.width,
                self.crack_length,
                self.half_height()
            )));
        }
        Ok(())
    }
}

/// Result of a virtual test.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Outcome {
    /// Failure time, h, and which criterion fired.
    Failed { hours: f64, mode: String },
    /// Survived the horizon (h).
    Runout { hours: f64 },
    /// The step control gave up; flagged for review, never counted as a runout.
    Inconclusive { hours: f64, reason: String },
}

impl Outcome {
    pub fn is_failed(&self) -> bool {
        matches!(self, Outcome::Failed { .. })
    }

    pub fn hours(&self) -> f64 {
        match self {
            Outcome::Failed { hours, .. } | Outcome::Runout { hours } | Outcome::Inconclusive { hours, .. } => *hours,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Failed { .. } => "failed",
            Outcome::Runout { .. } => "runout",
            Outcome::Inconclusive { .. } => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestRecord {
    /// Applied load, N.
    pub load: f64,
    pub crack_length: f64,
    /// Applied K_I, MPa√m.
    pub k_applied: f64,
    pub outcome: Outcome,
    pub steps: usize,
    /// Largest nodal concentration seen, wt ppm.
    pub peak_conc: f64,
    pub final_extent: f64,
}

/// Runs one constant-load test on `mesh` until failure or the horizon.
/// `observer` sees every accepted step.
pub fn run_virtual_test<F>(mesh: &Mesh, cfg: &SentConfig, mut observer: F) -> Result<TestRecord>
where
    F: FnMut(&SimState, &StepInfo) -> Result<()>,
{
    cfg.validate()?;
    cfg.check_mesh(mesh)?;
    let k = cfg.applied_k()?;
    let mut sim = Simulation::new(
        mesh,
        cfg.params,
        cfg.controls,
        cfg.environment.clone(),
        cfg.load,
        cfg.thickness,
    )?;
    let mut peak: f64 = 0.0;
    let horizon = cfg.horizon * 3600.0;
    let result = sim.run(horizon, |s, i| {
        peak = peak.max(i.peak_conc);
        observer(s, i)
    });
    let outcome = match result {
        Ok(Termination::Horizon) => Outcome::Runout { hours: cfg.horizon },
        Ok(t) => {
            let hours = t.failure_time().unwrap_or(horizon) / 3600.0;
            let mode = match t {
                Termination::CrackThrough { .. } => "crack-through".into(),
                Termination::Collapse { reason, .. } => format!("collapse: {reason}"),
                Termination::UnstableGrowth { extent, .. } => format!("unstable growth to x = {extent:.3} mm"),
                Termination::Horizon => unreachable!(),
            };
            Outcome::Failed {
                hours: hours.min(cfg.horizon),
                mode,
            }
        }
        Err(e @ (Error::StepFailure { .. } | Error::Stability { .. })) => Outcome::Inconclusive {
            hours: sim.state.time / 3600.0,
            reason: format!("{e}"),
        },
        Err(e) => return Err(e),
    };
    log::info!("K = {k:.2} MPa√m: {} at {:.2} h", outcome.label(), outcome.hours());
    Ok(TestRecord {
        load: cfg.load,
        crack_length: cfg.crack_length,
        k_applied: k,
        outcome,
        steps: sim.state.step,
        peak_conc: peak,
        final_extent: sim.state.crack_extent,
    })
}

/// Per-load records of a campaign with the derived threshold interval.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CampaignResult {
    pub records: Vec<TestRecord>,
    /// (largest runout K, smallest failed K), MPa√m.
    pub kth: Option<(f64, f64)>,
}

impl CampaignResult {
    pub fn new(mut records: Vec<TestRecord>) -> Self {
        records.sort_by(|a, b| a.k_applied.total_cmp(&b.k_applied));
        let kth = kth_interval(&records);
        Self { records, kth }
    }

    /// Pairs (K_lo, K_hi) of failed records whose failure time grows with K.
    pub fn severity_violations(&self) -> Vec<(f64, f64)> {
        let failed: Vec<_> = self.records.iter().filter(|r| r.outcome.is_failed()).collect();
        let mut out = Vec::new();
        for w in failed.windows(2) {
            if w[1].outcome.hours() > w[0].outcome.hours() * (1.0 + 1e-9) {
                out.push((w[0].k_applied, w[1].k_applied));
            }
        }
        out
    }
}

/// Largest runout K below the smallest failed K; `None` when either side is
/// missing or the outcomes interleave.
pub fn kth_interval(records: &[TestRecord]) -> Option<(f64, f64)> {
    let runout = records
        .iter()
        .filter(|r| matches!(r.outcome, Outcome::Runout { .. }))
        .map(|r| r.k_applied)
        .fold(f64::NEG_INFINITY, f64::max);
    let failed = records
        .iter()
        .filter(|r| r.outcome.is_failed())
        .map(|r| r.k_applied)
        .fold(f64::INFINITY, f64::min);
    (runout.is_finite() && failed.is_finite() && runout < failed).then_some((runout, failed))
}

/// Threshold bracket found by [`find_kth`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KthBracket {
    /// Largest K that ran out, MPa√m.
    pub runout: f64,
    /// Smallest K that failed, MPa√m.
    pub failed: f64,
    pub records: Vec<TestRecord>,
}

impl KthBracket {
    pub fn width(&self) -> f64 {
        self.failed - self.runout
    }

    pub fn contains(&self, k: f64) -> bool {
        self.runout <= k && k <= self.failed
    }
}

/// Bisection on K (equivalently on load at fixed a0). `grid` is evaluated
/// first to locate the bracket; its outcomes must be monotone in K. `run`
/// performs one test at the given K.
pub fn find_kth<R>(grid: &[f64], tolerance: f64, mut run: R) -> Result<KthBracket>
where
    R: FnMut(f64) -> Result<TestRecord>,
{
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("K grid needs at least two increasing values".into()));
    }
    if !(tolerance > 0.0) {
        return Err(Error::Config(format!("tolerance {tolerance} must be positive")));
    }
    let mut records = Vec::new();
    let mut eval = |k: f64, records: &mut Vec<TestRecord>| -> Result<bool> {
        let r = run(k)?;
        let failed = match &r.outcome {
            Outcome::Failed { .. } => true,
            Outcome::Runout { .. } => false,
            Outcome::Inconclusive { reason, .. } => {
                return Err(Error::Bracket(format!("test at K = {k:.3} MPa√m was inconclusive: {reason}")));
            }
        };
        records.push(r);
        Ok(failed)
    };
    let mut outcomes = Vec::with_capacity(grid.len());
    for &k in grid {
        outcomes.push(eval(k, &mut records)?);
    }
    if !outcomes[grid.len() - 1] {
        return Err(Error::Bracket(format!("no failure up to K = {:.3} MPa√m", grid[grid.len() - 1])));
    }
    if outcomes[0] {
        return Err(Error::Bracket(format!("failure already at K = {:.3} MPa√m", grid[0])));
    }
    let first_fail = outcomes.iter().position(|&f| f).unwrap_or(grid.len());
    if outcomes[first_fail..].iter().any(|&f| !f) {
        return Err(Error::Bracket(format!(
            "non-monotone outcomes over the grid {grid:?}: {outcomes:?}"
        )));
    }
    let (mut lo, mut hi) = (grid[first_fail - 1], grid[first_fail]);
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if eval(mid, &mut records)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    records.sort_by(|a, b| a.k_applied.total_cmp(&b.k_applied));
    Ok(KthBracket {
        runout: lo,
        failed: hi,
        records,
    })
}

/// Boundary mode of the stationary-crack study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum StationaryMode {
    /// Surface held at the schedule's peak from the start.
    ConstantMax,
    /// Surface follows the schedule.
    Scheduled,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StationaryReport {
    /// (h, peak ppm ahead of the tip, surface ppm).
    pub history: Vec<(f64, f64, f64)>,
    /// Concentration (x mm, ppm) along the ligament at the requested times.
    pub profiles: Vec<(f64, Vec<(f64, f64)>)>,
    /// Peak of the steady solution under the final surface value, ppm.
    pub steady_peak: f64,
    /// First time the peak reached 90% of `steady_peak`, h.
    pub t90: Option<f64>,
    /// Time of the largest peak, h.
    pub peak_time: f64,
}

impl StationaryReport {
    pub fn enrichment(&self) -> f64 {
        let surface = self.history.last().map_or(0.0, |h| h.2);
        if surface > 0.0 {
            self.steady_peak / surface
        } else {
            0.0
        }
    }
}

/// Deformation-diffusion run with φ frozen at the smeared initial crack.
/// Concentrations are recorded on the ligament ahead of the tip.
pub fn stationary_crack_study(mesh: &Mesh, cfg: &SentConfig, mode: StationaryMode, profile_hours: &[f64]) -> Result<StationaryReport> {
    cfg.validate()?;
    cfg.check_mesh(mesh)?;
    let schedule = match mode {
        StationaryMode::ConstantMax => EnvSchedule::constant(cfg.environment.peak().1)?,
        StationaryMode::Scheduled => cfg.environment.clone(),
    };
    let controls = StepControls {
        phase_field: false,
        ..cfg.controls
    };
    let mut sim = Simulation::new(mesh, cfg.params, controls, schedule.clone(), cfg.load, cfg.thickness)?;
    let mut ahead: Vec<usize> = mesh
        .sets
        .ligament
        .iter()
        .copied()
        .filter(|&n| mesh.nodes[n][0] >= cfg.crack_length - 1e-9)
        .collect();
    ahead.sort_by(|&a, &b| mesh.nodes[a][0].total_cmp(&mesh.nodes[b][0]));
    let peak_of = |conc: &[f64]| ahead.iter().map(|&n| molar_to_ppm(conc[n])).fold(0.0, f64::max);
    let profile_of = |conc: &[f64]| ahead.iter().map(|&n| (mesh.nodes[n][0], molar_to_ppm(conc[n]))).collect::<Vec<_>>();

    let mut history = Vec::new();
    let mut profiles = Vec::new();
    let mut targets: Vec<f64> = profile_hours.to_vec();
    targets.sort_by(f64::total_cmp);
    let mut next_profile = 0;
    let horizon = cfg.horizon * 3600.0;
    while sim.state.time < horizon - 1e-9 {
        // land exactly on requested profile times
        let stop = targets
            .get(next_profile)
            .map_or(horizon, |&h| (h * 3600.0).min(horizon));
        match sim.advance(stop)? {
            Ok(info) => {
                let h = info.time / 3600.0;
                history.push((h, peak_of(&sim.state.conc), info.surface_conc));
                while next_profile < targets.len() && targets[next_profile] * 3600.0 <= info.time + 1e-6 {
                    profiles.push((h, profile_of(&sim.state.conc)));
                    next_profile += 1;
                }
            }
            Err(t) => {
                return Err(Error::StepFailure {
                    time: sim.state.time,
                    dt: 0.0,
                    reason: format!("stationary crack run terminated: {t:?}"),
                });
            }
        }
    }
    let surface = history.last().map_or(0.0, |h| h.2);
    let steady = sim.steady_concentration(surface)?;
    let steady_peak = peak_of(&steady);
    let t90 = first_crossing(&history, 0.9 * steady_peak);
    let peak_time = history
        .iter()
        .fold((0.0, f64::NEG_INFINITY), |best, h| if h.1 > best.1 { (h.0, h.1) } else { best })
        .0;
    Ok(StationaryReport {
        history,
        profiles,
        steady_peak,
        t90,
        peak_time,
    })
}

/// Linear interpolation of the first time `history` reaches `level`.
fn first_crossing(history: &[(f64, f64, f64)], level: f64) -> Option<f64> {
    let mut prev = (0.0, 0.0);
    for &(t, c, _) in history {
        if c >= level {
            if c == prev.1 {
                return Some(t);
            }
            return Some(prev.0 + (level - prev.1) / (c - prev.1) * (t - prev.0));
        }
        prev = (t, c);
    }
    None
}
