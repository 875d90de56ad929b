//! Staggered time stepping of the deformation, phase-field and diffusion
//! problems under constant load.
//!
//! Each step iterates passes of (1) equilibrium at fixed φ, (2) history
//! update, (3) phase-field solve at fixed H and Gc(C), (4) diffusion at fixed
//! σ_h and φ, until the largest nodal change of φ between passes drops below
//! the tolerance. Steps that do not converge are retried with half the step.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::diffusion::{
    check_stability, effective_diffusivity, molar_to_ppm, ppm_to_molar, step_diffusion, DiffusionSystem,
    EnvSchedule, TransportField,
};
use crate::error::{Error, Result};
use crate::fem::{nodal_gradient_at_points, recover_nodal, Mesh};
use crate::material::MaterialParams;
use crate::mechanics::{
    driving_energy, hydrostatic_stress, plastic_energy, solve_equilibrium, EnergySplit, MechanicsOptions,
    MechanicsSystem, PlasticState,
};
use crate::phasefield::{gc_unchecked, solve_phase_subproblem, update_history, PhaseSystem};

/// Time-stepping and convergence controls.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct StepControls {
    /// First step after the load ramp, s.
    pub dt_initial: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Load is ramped linearly over this time, s.
    pub ramp_time: f64,
    pub ramp_steps: usize,
    pub max_passes: usize,
    /// Staggered tolerance on max |Δφ| between passes.
    pub tolerance: f64,
    /// A step that uses up `max_passes` is still accepted, flagged as
    /// unconverged, when its last pass moved φ by less than this.
    pub accept_tolerance: f64,
    /// Step growth is allowed while the step's max Δφ stays below this.
    pub phi_increment_target: f64,
    /// Largest change of the surface concentration per step, as a fraction
    /// of the schedule peak.
    pub schedule_change: f64,
    /// Failure once the crack has crossed this fraction of the ligament.
    pub crack_fraction: f64,
    /// Passes allowed at the minimum step before an advancing crack is
    /// declared unstable.
    pub runaway_passes: usize,
    /// Crack advance (mm) at steps no longer than `fast_dt` that counts as
    /// unstable growth.
    pub runaway_advance: f64,
    pub fast_dt: f64,
    /// Fraction of nodes allowed below the concentration undershoot tolerance.
    pub max_negative_fraction: f64,
    pub mechanics: MechanicsOptions,
    pub energy_split: EnergySplit,
    pub subtract_plastic_offset: bool,
    pub lumped_mass: bool,
    /// Phase field is solved; when false φ stays at its initial field.
    pub phase_field: bool,
}

impl Default for StepControls {
    fn default() -> Self {
        Self {
            dt_initial: 60.0,
            dt_min: 1e-3,
            dt_max: 4.0 * 3600.0,
            ramp_time: 10.0,
            ramp_steps: 5,
            max_passes: 20,
            tolerance: 1e-3,
            accept_tolerance: 1e-2,
            phi_increment_target: 0.05,
            schedule_change: 0.1,
            crack_fraction: 0.9,
            runaway_passes: 400,
            runaway_advance: 0.25,
            fast_dt: 1.0,
            max_negative_fraction: 0.25,
            mechanics: MechanicsOptions::default(),
            energy_split: EnergySplit::None,
            subtract_plastic_offset: false,
            lumped_mass: true,
            phase_field: true,
        }
    }
}

impl StepControls {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > 0.0
            && self.dt_min <= self.dt_initial
            && self.dt_initial <= self.dt_max
            && self.tolerance > 0.0
            && self.accept_tolerance >= self.tolerance
            && self.mechanics.tolerance > 0.0
            && self.max_passes > 0
            && self.ramp_time >= 0.0
            && self.crack_fraction > 0.0
            && self.crack_fraction <= 1.0
            && self.phi_increment_target > 0.0
            && self.schedule_change > 0.0
            && self.runaway_advance > 0.0
            && self.fast_dt >= self.dt_min;
        if !ok {
            return Err(Error::Config(format!(
                "step controls violate dt_min <= dt_initial <= dt_max or have non-positive tolerances: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Full simulation state.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimState {
    /// Seconds since loading and exposure began.
    pub time: f64,
    pub step: usize,
    /// Nodal displacements, (u_x, u_y) per node.
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    /// Nodal concentration, mol/mm³.
    pub conc: Vec<f64>,
    pub points: Vec<PlasticState>,
    /// Applied load, N.
    pub load: f64,
    pub converged: bool,
    /// Largest x on the ligament with φ > 0.95, mm.
    pub crack_extent: f64,
}

/// Boundary conditions of the SENT half model under load `p_total` (N) on
/// a specimen of thickness `thickness` (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantLoad {
    pub p_total: f64,
    pub thickness: f64,
}

/// Builds the rigid top-edge constraint (tied u_y, u_x = 0) and the ligament
/// symmetry condition, returning the mechanics system and the load it
/// carries per unit thickness.
pub fn apply_constant_load(mesh: &Mesh, p_total: f64, thickness: f64) -> Result<(MechanicsSystem, f64)> {
    if !(thickness > 0.0) {
        return Err(Error::Config(format!("thickness {thickness} must be positive")));
    }
    let sys = MechanicsSystem::sent(mesh)?;
    Ok((sys, p_total / thickness))
}

/// Outcome of [`detect_failure`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FailureStatus {
    Intact,
    /// Failure time, s.
    Failed(f64),
}

/// Criterion (a): the crack has crossed `crack_fraction` of the ligament.
/// Criterion (b), collapse at the minimum step, is raised by the driver.
pub fn detect_failure(state: &SimState, mesh: &Mesh, controls: &StepControls) -> FailureStatus {
    let Some(g) = mesh.sent else {
        return FailureStatus::Intact;
    };
    let limit = g.crack_length + controls.crack_fraction * (g.width - g.crack_length);
    if state.crack_extent >= limit - 1e-12 {
        FailureStatus::Failed(state.time)
    } else {
        FailureStatus::Intact
    }
}

/// Largest ligament x with φ above 0.95 (the initial tip when none).
pub fn crack_extent(mesh: &Mesh, phi: &[f64]) -> f64 {
    let a0 = mesh.sent.map_or(0.0, |g| g.crack_length);
    mesh.sets
        .ligament
        .iter()
        .filter(|&&n| phi[n] > 0.95)
        .map(|&n| mesh.nodes[n][0])
        .fold(a0, f64::max)
}

/// Why a simulation stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    /// Horizon reached without failure.
    Horizon,
    /// Crack crossed the ligament fraction.
    CrackThrough { time: f64 },
    /// Equilibrium could not be found at the minimum step.
    Collapse { time: f64, reason: String },
    /// Crack kept advancing at the minimum step without the staggered
    /// iteration settling.
    UnstableGrowth { time: f64, extent: f64 },
}

impl Termination {
    pub fn failure_time(&self) -> Option<f64> {
        match self {
            Termination::Horizon => None,
            Termination::CrackThrough { time }
            | Termination::Collapse { time, .. }
            | Termination::UnstableGrowth { time, .. } => Some(*time),
        }
    }
}

/// Scalar summary of an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepInfo {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub load: f64,
    pub passes: usize,
    pub newton_iterations: usize,
    pub crack_extent: f64,
    /// Peak nodal concentration, wt ppm.
    pub peak_conc: f64,
    /// Surface concentration imposed this step, wt ppm.
    pub surface_conc: f64,
    pub peak_sigma_h: f64,
    pub max_phi_increment: f64,
    pub negative_nodes: usize,
    /// Ligament reaction / applied load per unit thickness (1 at equilibrium).
    pub reaction_ratio: f64,
    /// False when the step was accepted at the pass cap.
    pub converged: bool,
}

/// Field quantities of the last converged mechanics solve.
#[derive(Debug, Clone, Default)]
struct MechanicsCache {
    grad_sigma_h: Vec<[f64; 2]>,
    sigma_h_nodal: Vec<f64>,
    reaction: f64,
}

/// Coupled SENT simulation.
pub struct Simulation<'m> {
    pub mesh: &'m Mesh,
    pub params: MaterialParams,
    pub controls: StepControls,
    pub schedule: EnvSchedule,
    mech: MechanicsSystem,
    phase: PhaseSystem,
    diff: DiffusionSystem,
    load_target: f64,
    thickness: f64,
    pub state: SimState,
    cache: MechanicsCache,
    /// Smeared initial crack; kept when the phase field is frozen.
    phi_initial: Vec<f64>,
    dt_next: f64,
    /// (time, extent) when the step first dropped to `fast_dt`.
    fast_start: Option<(f64, f64)>,
}

struct PassResult {
    u: Vec<f64>,
    phi: Vec<f64>,
    conc: Vec<f64>,
    points: Vec<PlasticState>,
    passes: usize,
    newton: usize,
    negative: usize,
    cache: MechanicsCache,
    converged: bool,
}

/// Consecutive passes of growing damage change that mark an unstable step.
const DIVERGENCE_PASSES: usize = 6;

enum StepError {
    /// `diverging`: the damage change grew pass after pass.
    NotConverged { extent_gain: f64, diverging: bool },
    Equilibrium(Error),
    Other(Error),
}

impl<'m> Simulation<'m> {
    /// `load` in N on a specimen of thickness `thickness` mm.
    pub fn new(
        mesh: &'m Mesh,
        params: MaterialParams,
        controls: StepControls,
        schedule: EnvSchedule,
        load: f64,
        thickness: f64,
    ) -> Result<Self> {
        params.validate()?;
        controls.validate()?;
        let (mech, load_per_thickness) = apply_constant_load(mesh, load, thickness)?;
        let cracked = mesh.sets.crack_face.clone();
        let mut phase = PhaseSystem::new(mesh, &cracked)?;
        if mesh.sets.exposed.is_empty() {
            return Err(Error::Config("no exposed surface for the hydrogen boundary condition".into()));
        }
        let diff = DiffusionSystem::new(mesh, &mesh.sets.exposed, controls.lumped_mass)?;
        let n = mesh.n_nodes();
        let nq = mesh.n_elements() * mesh.points_per_element();
        // smeared profile of the initial crack: φ = 1 on the faces, no history
        let mut phi = vec![0.0; n];
        for &c in &cracked {
            phi[c] = 1.0;
        }
        let gc0 = vec![params.toughness; nq];
        solve_phase_subproblem(mesh, &mut phase, &vec![0.0; nq], &gc0, params.length_scale, &mut phi, None)?;
        let state = SimState {
            time: 0.0,
            step: 0,
            u: vec![0.0; 2 * n],
            phi: phi.clone(),
            conc: vec![0.0; n],
            points: vec![PlasticState::default(); nq],
            load: 0.0,
            converged: true,
            crack_extent: crack_extent(mesh, &phi),
        };
        let _ = load_per_thickness;
        Ok(Self {
            mesh,
            params,
            controls,
            schedule,
            mech,
            phase,
            diff,
            load_target: load,
            thickness,
            state,
            cache: MechanicsCache {
                grad_sigma_h: vec![[0.0; 2]; nq],
                sigma_h_nodal: vec![0.0; n],
                reaction: 0.0,
            },
            phi_initial: phi,
            dt_next: 0.0,
            fast_start: None,
        })
    }

    /// Replaces the state, e.g. from a checkpoint.
    pub fn restore(&mut self, state: SimState) -> Result<()> {
        let n = self.mesh.n_nodes();
        let nq = self.mesh.n_elements() * self.mesh.points_per_element();
        if state.u.len() != 2 * n || state.phi.len() != n || state.conc.len() != n || state.points.len() != nq {
            return Err(Error::State("checkpoint does not match the mesh".into()));
        }
        self.state = state;
        self.refresh_cache();
        Ok(())
    }

    fn refresh_cache(&mut self) {
        let sh: Vec<f64> = self.state.points.iter().map(|s| hydrostatic_stress(&s.stress)).collect();
        let nodal = recover_nodal(self.mesh, &sh);
        self.cache.grad_sigma_h = nodal_gradient_at_points(self.mesh, &nodal);
        self.cache.sigma_h_nodal = nodal;
    }

    pub fn load_per_thickness_at(&self, t: f64) -> f64 {
        let ramp = if self.controls.ramp_time > 0.0 {
            (t / self.controls.ramp_time).min(1.0)
        } else {
            1.0
        };
        self.load_target * ramp / self.thickness
    }

    /// Nodal σ_h of the last converged state, MPa.
    pub fn sigma_h_nodal(&self) -> &[f64] {
        &self.cache.sigma_h_nodal
    }

    pub fn mechanics_system(&self) -> &MechanicsSystem {
        &self.mech
    }

    /// Steady concentration (mol/mm³) under the current stress and damage
    /// with the surface held at `surface_ppm`.
    pub fn steady_concentration(&mut self, surface_ppm: f64) -> Result<Vec<f64>> {
        let mesh = self.mesh;
        let dq: Vec<f64> = crate::phasefield::phi_at_points(mesh, &self.state.phi)
            .into_iter()
            .map(|f| effective_diffusivity(f, &self.params))
            .collect();
        let field = TransportField {
            diffusivity: &dq,
            grad_sigma_h: &self.cache.grad_sigma_h,
            drift: self.params.drift_coefficient(),
        };
        self.diff.set_boundary_value(ppm_to_molar(surface_ppm));
        let mut out = self.state.conc.clone();
        step_diffusion(mesh, &mut self.diff, field, &self.state.conc, &mut out, f64::INFINITY)?;
        Ok(out)
    }

    /// One staggered solve from the current state to `t + dt`.
    /// With `bail` set, a pass sequence whose damage change keeps growing is
    /// abandoned early.
    fn staggered(&mut self, dt: f64, max_passes: usize, bail: bool) -> core::result::Result<PassResult, StepError> {
        let mesh = self.mesh;
        let p = &self.params;
        let c = &self.controls;
        let t1 = self.state.time + dt;
        let load = self.load_per_thickness_at(t1);
        let surface = ppm_to_molar(self.schedule.eval_seconds(t1));
        self.diff.set_boundary_value(surface);
        let nqp = mesh.points_per_element();
        let nq = mesh.n_elements() * nqp;

        let committed = &self.state.points;
        let mut u = self.state.u.clone();
        let mut phi = self.state.phi.clone();
        let mut conc = self.state.conc.clone();
        let mut points = committed.clone();
        let mut cache = self.cache.clone();
        let mut newton = 0;
        let mut negative = 0;
        let mut mech_phi: Option<Vec<f64>> = None;
        let extent0 = self.state.crack_extent;
        let mut growth = 0;
        let mut last_change = f64::INFINITY;
        let load_changed = (load - self.state.load / self.thickness).abs() > 1e-14 * load.abs().max(1.0);

        for pass in 1..=max_passes {
            // (1) equilibrium at the current φ
            let need_mech = load_changed || mech_phi.is_some() || phi != self.state.phi;
            if need_mech && mech_phi.as_deref() != Some(&phi[..]) {
                let rep = solve_equilibrium(mesh, &mut self.mech, &mut u, &phi, committed, p, &c.mechanics, load)
                    .map_err(|e| match e {
                        Error::Equilibrium(_) | Error::Solver(_) | Error::LocalSolve { .. } | Error::NumericalBreakdown { .. } => {
                            StepError::Equilibrium(e)
                        }
                        other => StepError::Other(other),
                    })?;
                newton += rep.iterations;
                points = rep.states;
                cache.reaction = rep.ligament_reaction;
                let sh: Vec<f64> = points.iter().map(|s| hydrostatic_stress(&s.stress)).collect();
                cache.sigma_h_nodal = recover_nodal(mesh, &sh);
                cache.grad_sigma_h = nodal_gradient_at_points(mesh, &cache.sigma_h_nodal);
                mech_phi = Some(phi.clone());
            }

            // (2) history and (3) phase field
            let mut change = 0.0_f64;
            if c.phase_field {
                let mut hist = vec![0.0; nq];
                let mut gc = vec![0.0; nq];
                for (e, conn) in mesh.elements.iter().enumerate() {
                    for (k, q) in mesh.quad_points(e).iter().enumerate() {
                        let i = e * nqp + k;
                        let s = &mut points[i];
                        let ee = s.elastic_strain(&s.strain);
                        let psi_e = driving_energy(&ee, p, c.energy_split);
                        let psi_p = plastic_energy(s.eq_plastic_strain, p, c.subtract_plastic_offset)
                            .map_err(StepError::Other)?;
                        let (he, h) =
                            update_history(psi_e, psi_p, committed[i].history_elastic, p.stored_plastic_fraction);
                        s.history_elastic = he;
                        s.history = h;
                        hist[i] = h;
                        let cq: f64 = conn.iter().enumerate().map(|(a, &n)| q.n[a] * conc[n]).sum();
                        gc[i] = gc_unchecked(molar_to_ppm(cq).max(0.0), p);
                    }
                }
                let before = phi.clone();
                solve_phase_subproblem(mesh, &mut self.phase, &hist, &gc, p.length_scale, &mut phi, Some(&self.state.phi))
                    .map_err(StepError::Other)?;
                change = phi.iter().zip(&before).fold(0.0, |m, (a, b)| m.max((a - b).abs()));
            } else {
                phi.clone_from(&self.phi_initial);
            }

            // (4) diffusion
            let mut dq = Vec::with_capacity(nq);
            for (e, conn) in mesh.elements.iter().enumerate() {
                for q in mesh.quad_points(e) {
                    let f: f64 = conn.iter().enumerate().map(|(a, &n)| q.n[a] * phi[n]).sum();
                    dq.push(effective_diffusivity(f.clamp(0.0, 1.0), p));
                }
            }
            let field = TransportField {
                diffusivity: &dq,
                grad_sigma_h: &cache.grad_sigma_h,
                drift: p.drift_coefficient(),
            };
            let rep = step_diffusion(mesh, &mut self.diff, field, &self.state.conc, &mut conc, dt).map_err(StepError::Other)?;
            check_stability(&rep, mesh.n_nodes(), c.max_negative_fraction).map_err(StepError::Other)?;
            negative = rep.negative;

            // Gc lags the concentration by one pass, so a damaging step needs a
            // second pass to see the diffusion update
            log::trace!("pass {pass}: dphi {change:.3e} newton {newton} dt {dt}");
            growth = if change > last_change { growth + 1 } else { 0 };
            last_change = change;
            let settled = change < c.tolerance && (pass > 1 || !c.phase_field);
            let tolerable = bail && pass == max_passes && growth < DIVERGENCE_PASSES && change < c.accept_tolerance;
            if settled || tolerable {
                return Ok(PassResult {
                    u,
                    phi,
                    conc,
                    points,
                    passes: pass,
                    newton,
                    negative,
                    cache,
                    converged: settled,
                });
            }
            if pass == max_passes || (bail && growth >= DIVERGENCE_PASSES) {
                break;
            }
        }
        let extent = crack_extent(mesh, &phi);
        let _ = negative;
        Err(StepError::NotConverged {
            extent_gain: extent - extent0,
            diverging: growth >= DIVERGENCE_PASSES,
        })
    }

    fn accept(&mut self, dt: f64, r: PassResult) -> StepInfo {
        let max_inc = r.phi.iter().zip(&self.state.phi).fold(0.0_f64, |m, (a, b)| m.max(a - b));
        let t1 = self.state.time + dt;
        self.state.time = t1;
        self.state.step += 1;
        self.state.u = r.u;
        self.state.phi = r.phi;
        self.state.conc = r.conc;
        self.state.points = r.points;
        self.state.load = self.load_per_thickness_at(t1) * self.thickness;
        self.state.converged = r.converged;
        self.state.crack_extent = crack_extent(self.mesh, &self.state.phi).max(self.state.crack_extent);
        self.cache = r.cache;
        let lpt = self.state.load / self.thickness;
        StepInfo {
            step: self.state.step,
            time: t1,
            dt,
            load: self.state.load,
            passes: r.passes,
            newton_iterations: r.newton,
            crack_extent: self.state.crack_extent,
            peak_conc: molar_to_ppm(self.state.conc.iter().copied().fold(0.0, f64::max)),
            surface_conc: self.schedule.eval_seconds(t1),
            peak_sigma_h: self.cache.sigma_h_nodal.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            max_phi_increment: max_inc,
            negative_nodes: r.negative,
            reaction_ratio: if lpt != 0.0 { -self.cache.reaction / lpt } else { 1.0 },
            converged: self.state.converged,
        }
    }

    /// Largest step from the current time that keeps the surface
    /// concentration change within the allowed fraction of the peak.
    fn schedule_limited(&self, dt: f64) -> f64 {
        let peak = self.schedule.peak().1;
        if peak <= 0.0 {
            return dt;
        }
        let t0 = self.state.time;
        let c0 = self.schedule.eval_seconds(t0);
        let allowed = self.controls.schedule_change * peak;
        let mut dt = dt;
        for _ in 0..60 {
            if (self.schedule.eval_seconds(t0 + dt) - c0).abs() <= allowed {
                break;
            }
            dt *= 0.5;
        }
        dt
    }

    /// Advances one accepted step, cutting the step on trouble. Returns the
    /// step summary, or the termination if the specimen failed.
    pub fn advance(&mut self, horizon: f64) -> Result<core::result::Result<StepInfo, Termination>> {
        let c = self.controls;
        let t0 = self.state.time;
        let in_ramp = t0 < c.ramp_time - 1e-12;
        let mut dt = if in_ramp {
            (c.ramp_time / c.ramp_steps.max(1) as f64).min(c.ramp_time - t0)
        } else if self.dt_next > 0.0 {
            self.dt_next
        } else {
            c.dt_initial
        };
        if !in_ramp {
            dt = self.schedule_limited(dt.min(c.dt_max)).max(c.dt_min);
        }
        dt = dt.min(horizon - t0).max(1e-9);
        loop {
            match self.staggered(dt, c.max_passes, true) {
                Ok(r) => {
                    let before = (self.state.time, self.state.crack_extent);
                    let info = self.accept(dt, r);
                    if let Some(t) = self.track_fast_growth(dt, before) {
                        return Ok(Err(t));
                    }
                    // grow or shrink the next step from the damage rate
                    let next = if info.max_phi_increment > 1e-12 {
                        dt * (c.phi_increment_target / info.max_phi_increment).clamp(0.25, 2.0)
                    } else {
                        dt * 2.0
                    };
                    if !in_ramp || self.dt_next == 0.0 {
                        self.dt_next = next.clamp(c.dt_min, c.dt_max);
                    }
                    if in_ramp && self.state.time >= c.ramp_time - 1e-12 {
                        self.dt_next = c.dt_initial;
                    }
                    if let FailureStatus::Failed(t) = detect_failure(&self.state, self.mesh, &c) {
                        return Ok(Err(Termination::CrackThrough { time: t }));
                    }
                    return Ok(Ok(info));
                }
                Err(StepError::Other(e)) => {
                    if matches!(e, Error::Stability { .. }) && dt > c.dt_min * 2.0 {
                        // undershoot from a sharp front is milder with longer steps only
                        // at the surface; retry with a smaller step first
                        dt *= 0.5;
                        continue;
                    }
                    return Err(e);
                }
                Err(StepError::Equilibrium(e)) => {
                    if dt <= c.dt_min * (1.0 + 1e-9) {
                        return Ok(Err(Termination::Collapse {
                            time: self.state.time + dt,
                            reason: format!("{e}"),
                        }));
                    }
                    dt = (dt * 0.25).max(c.dt_min);
                }
                Err(StepError::NotConverged { diverging, .. }) => {
                    if dt <= c.dt_min * (1.0 + 1e-9) || (diverging && dt <= c.fast_dt) {
                        return self.runaway(dt);
                    }
                    // a growing damage change is not cured by small cuts
                    dt = if diverging { c.fast_dt.min(dt * 0.25) } else { dt * 0.25 }.max(c.dt_min);
                }
            }
        }
    }

    /// A crack that keeps advancing while the step stays at the fast scale,
    /// or while the staggered passes no longer settle, is running unstably;
    /// failure is dated to the start of that phase.
    fn track_fast_growth(&mut self, dt: f64, before: (f64, f64)) -> Option<Termination> {
        let c = &self.controls;
        let fast = dt <= c.fast_dt || !self.state.converged;
        if !fast || self.state.time <= c.ramp_time {
            self.fast_start = None;
            return None;
        }
        let start = *self.fast_start.get_or_insert(before);
        if self.state.crack_extent - start.1 >= c.runaway_advance {
            return Some(Termination::UnstableGrowth {
                time: start.0,
                extent: self.state.crack_extent,
            });
        }
        None
    }

    /// At the minimum step the staggered iteration is continued; a crack
    /// that keeps running is an unstable fracture.
    fn runaway(&mut self, dt: f64) -> Result<core::result::Result<StepInfo, Termination>> {
        let c = self.controls;
        match self.staggered(dt, c.runaway_passes, false) {
            Ok(r) => {
                let before = (self.state.time, self.state.crack_extent);
                let info = self.accept(dt, r);
                self.dt_next = c.dt_min;
                if let Some(t) = self.track_fast_growth(dt, before) {
                    return Ok(Err(t));
                }
                if let FailureStatus::Failed(t) = detect_failure(&self.state, self.mesh, &c) {
                    return Ok(Err(Termination::CrackThrough { time: t }));
                }
                Ok(Ok(info))
            }
            Err(StepError::NotConverged { extent_gain, .. }) => {
                let t = self.state.time + dt;
                if extent_gain >= c.runaway_advance {
                    Ok(Err(Termination::UnstableGrowth {
                        time: t,
                        extent: self.state.crack_extent + extent_gain,
                    }))
                } else {
                    Err(Error::StepFailure {
                        time: self.state.time,
                        dt,
                        reason: format!(
                            "staggered iteration not converged after {} passes (crack advanced {extent_gain:.3} mm)",
                            c.runaway_passes
                        ),
                    })
                }
            }
            Err(StepError::Equilibrium(e)) => Ok(Err(Termination::Collapse {
                time: self.state.time + dt,
                reason: format!("{e}"),
            })),
            Err(StepError::Other(e)) => Err(e),
        }
    }

    /// Runs to `horizon` seconds or failure, calling `observer` after every
    /// accepted step.
    pub fn run<F>(&mut self, horizon: f64, mut observer: F) -> Result<Termination>
    where
        F: FnMut(&SimState, &StepInfo) -> Result<()>,
    {
        while self.state.time < horizon - 1e-9 {
            match self.advance(horizon)? {
                Ok(info) => observer(&self.state, &info)?,
                Err(term) => return Ok(term),
            }
        }
        Ok(Termination::Horizon)
    }
}
