//! Stress-assisted hydrogen transport.
//!
//! Backward-Euler Galerkin discretization of
//! `∂C/∂t = ∇·(D∇C − D C (V_H/RT) ∇σ_h)` with Dirichlet data on the exposed
//! boundary and zero flux elsewhere. The matrix is unsymmetric because of the
//! drift term.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use libm::exp;

use crate::error::{Error, Result};
use crate::fem::{DofMap, Mesh, Profile, SparseSystem};
use crate::material::MaterialParams;

/// Density of iron, g/mm³.
pub const IRON_DENSITY: f64 = 7.87e-3;
/// Molar mass of hydrogen, g/mol.
pub const HYDROGEN_MOLAR_MASS: f64 = 1.008;

/// mol/mm³ per wt ppm.
pub const PPM_TO_MOLAR: f64 = IRON_DENSITY / (HYDROGEN_MOLAR_MASS * 1.0e6);

pub fn ppm_to_molar(c_ppm: f64) -> f64 {
    c_ppm * PPM_TO_MOLAR
}

pub fn molar_to_ppm(c_molar: f64) -> f64 {
    c_molar / PPM_TO_MOLAR
}

/// D = D0 (1 + k_d ⟨φ − φ_th⟩).
pub fn effective_diffusivity(phi: f64, p: &MaterialParams) -> f64 {
    p.diffusivity * (1.0 + p.diffusivity_amplification * (phi - p.damage_threshold).max(0.0))
}

/// Zero-flux equilibrium enrichment exp(V_H σ_h / RT).
pub fn steady_amplification(sigma_h: f64, p: &MaterialParams) -> f64 {
    exp(p.drift_coefficient() * sigma_h)
}

/// Piecewise-linear surface concentration in time (hours, wt ppm), held
/// constant outside the knot range.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvSchedule {
    knots: Vec<(f64, f64)>,
}

impl EnvSchedule {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Config("schedule needs at least one knot".into()));
        }
        for (i, &(t, c)) in knots.iter().enumerate() {
            if !t.is_finite() || !c.is_finite() || c < 0.0 {
                return Err(Error::Config(format!("schedule knot {i} ({t}, {c}) is invalid")));
            }
            if i > 0 && !(t > knots[i - 1].0) {
                return Err(Error::Config(format!("schedule times must increase strictly (knot {i})")));
            }
        }
        Ok(Self { knots })
    }

    pub fn constant(c_ppm: f64) -> Result<Self> {
        Self::new(vec![(0.0, c_ppm)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Last knot time, hours.
    pub fn end(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    pub fn peak(&self) -> (f64, f64) {
        self.knots
            .iter()
            .copied()
            .fold((0.0, f64::NEG_INFINITY), |m, k| if k.1 > m.1 { k } else { m })
    }

    /// Value at `hours`.
    pub fn eval(&self, hours: f64) -> f64 {
        let k = &self.knots;
        if hours <= k[0].0 {
            return k[0].1;
        }
        if hours >= k[k.len() - 1].0 {
            return k[k.len() - 1].1;
        }
        let i = k.partition_point(|&(t, _)| t <= hours);
        let ((t0, c0), (t1, c1)) = (k[i - 1], k[i]);
        c0 + (c1 - c0) * (hours - t0) / (t1 - t0)
    }

    pub fn eval_seconds(&self, seconds: f64) -> f64 {
        self.eval(seconds / 3600.0)
    }

    /// Times (hours) of interior knots in (a, b), where the slope changes.
    pub fn breakpoints_between(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        self.knots.iter().map(|k| k.0).filter(move |&t| t > a && t < b)
    }
}

/// Concentration equations with Dirichlet nodes.
#[derive(Debug, Clone)]
pub struct DiffusionSystem {
    pub dofs: DofMap,
    pub system: SparseSystem,
    /// Row-scaled (HRZ) diagonal mass instead of the consistent mass.
    pub lumped: bool,
}

impl DiffusionSystem {
    pub fn new(mesh: &Mesh, dirichlet: &[usize], lumped: bool) -> Result<Self> {
        let dofs = DofMap::builder(mesh, 1).fix_nodes(dirichlet, 0, 0.0).build()?;
        let mut eqs = [None; 8];
        let lists: Vec<[Option<usize>; 8]> = mesh
            .elements
            .iter()
            .map(|c| {
                dofs.element_equations(c, &mut eqs);
                eqs
            })
            .collect();
        let profile = Arc::new(Profile::from_elements(dofs.n_eq(), lists.iter().map(|v| &v[..])));
        Ok(Self {
            dofs,
            system: SparseSystem::new(profile, false),
            lumped,
        })
    }

    /// Sets every Dirichlet node to `c` (mol/mm³).
    pub fn set_boundary_value(&mut self, c: f64) {
        self.dofs.set_all_prescribed(c);
    }
}

/// Element mass matrix, consistent or HRZ-lumped.
fn element_mass(mesh: &Mesh, e: usize, lumped: bool, me: &mut [f64; 64]) {
    me.iter_mut().for_each(|v| *v = 0.0);
    let mut area = 0.0;
    for q in mesh.quad_points(e) {
        area += q.weight;
        for a in 0..8 {
            for b in 0..8 {
                me[a * 8 + b] += q.n[a] * q.n[b] * q.weight;
            }
        }
    }
    if lumped {
        let diag: f64 = (0..8).map(|a| me[a * 9]).sum();
        let s = area / diag;
        for a in 0..8 {
            let d = me[a * 9] * s;
            for b in 0..8 {
                me[a * 8 + b] = 0.0;
            }
            me[a * 9] = d;
        }
    }
}

/// Per-point transport data for one step.
#[derive(Debug, Clone, Copy)]
pub struct TransportField<'a> {
    /// Effective diffusivity at each quadrature point, mm²/s.
    pub diffusivity: &'a [f64],
    /// ∇σ_h at each quadrature point, MPa/mm.
    pub grad_sigma_h: &'a [[f64; 2]],
    /// V_H / RT, 1/MPa.
    pub drift: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DiffusionReport {
    /// Nodes below the undershoot tolerance.
    pub negative: usize,
    pub min: f64,
}

/// Undershoot tolerance in wt ppm.
pub const NEGATIVE_TOLERANCE_PPM: f64 = 1e-6;

/// One backward-Euler step from `prev` to `conc` (nodal, mol/mm³). With
/// `dt = ∞` the steady problem is solved.
pub fn step_diffusion(
    mesh: &Mesh,
    sys: &mut DiffusionSystem,
    field: TransportField<'_>,
    prev: &[f64],
    conc: &mut [f64],
    dt: f64,
) -> Result<DiffusionReport> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
    }
    let nqp = mesh.points_per_element();
    let inv_dt = if dt.is_finite() { 1.0 / dt } else { 0.0 };
    sys.system.reset();
    let mut eqs = [None; 8];
    let mut ke = [0.0; 64];
    let mut me = [0.0; 64];
    for (e, conn) in mesh.elements.iter().enumerate() {
        ke.iter_mut().for_each(|v| *v = 0.0);
        for (k, q) in mesh.quad_points(e).iter().enumerate() {
            let d = field.diffusivity[e * nqp + k] * q.weight;
            let g = field.grad_sigma_h[e * nqp + k];
            let v = [d * field.drift * g[0], d * field.drift * g[1]];
            for a in 0..8 {
                let (ax, ay) = (q.dndx[a][0], q.dndx[a][1]);
                let drift_a = ax * v[0] + ay * v[1];
                for b in 0..8 {
                    ke[a * 8 + b] += d * (ax * q.dndx[b][0] + ay * q.dndx[b][1]) - drift_a * q.n[b];
                }
            }
        }
        let mut fe = [0.0; 8];
        if inv_dt > 0.0 {
            element_mass(mesh, e, sys.lumped, &mut me);
            for a in 0..8 {
                for b in 0..8 {
                    let m = me[a * 8 + b] * inv_dt;
                    ke[a * 8 + b] += m;
                    fe[a] += m * prev[conn[b]];
                }
            }
        }
        if fe.iter().chain(ke.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericalBreakdown { element: e });
        }
        sys.dofs.element_equations(conn, &mut eqs);
        for a in 0..8 {
            let Some(i) = eqs[a] else { continue };
            let mut r = fe[a];
            for b in 0..8 {
                if eqs[b].is_none() {
                    r -= ke[a * 8 + b] * sys.dofs.prescribed(conn[b]);
                }
            }
            sys.system.rhs[i] += r;
        }
        sys.system.matrix.add_element(&eqs, &ke);
    }
    let x = crate::fem::solve_linear(&mut sys.system)?;
    sys.dofs.scatter_solution(x, conc);
    sys.dofs.impose(conc);
    let tol = -ppm_to_molar(NEGATIVE_TOLERANCE_PPM);
    let negative = conc.iter().filter(|&&c| c < tol).count();
    let min = conc.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DiffusionReport { negative, min })
}

/// Fails when more than `max_fraction` of the nodes undershoot.
pub fn check_stability(report: &DiffusionReport, n_nodes: usize, max_fraction: f64) -> Result<()> {
    if report.negative as f64 > max_fraction * n_nodes as f64 {
        return Err(Error::Stability {
            count: report.negative,
            total: n_nodes,
        });
    }
    Ok(())
}

/// Hydrogen content Σ M C per unit thickness, using the same mass matrix as
/// the time stepping (mol/mm when C is in mol/mm³).
pub fn total_mass(mesh: &Mesh, conc: &[f64], lumped: bool) -> f64 {
    let mut me = [0.0; 64];
    let mut total = 0.0;
    for (e, conn) in mesh.elements.iter().enumerate() {
        element_mass(mesh, e, lumped, &mut me);
        for a in 0..8 {
            for b in 0..8 {
                total += me[a * 8 + b] * conc[conn[b]];
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{nodal_gradient_at_points, Quadrature};
    use core::f64::consts::PI;
    use proptest::prelude::*;

    #[test]
    fn diffusivity_values() {
        let p = MaterialParams::default();
        assert_eq!(effective_diffusivity(0.0, &p), 1.4e-4);
        assert_eq!(effective_diffusivity(0.8, &p), 1.4e-4);
        assert!((effective_diffusivity(1.0, &p) - 1.4e-4 * 201.0).abs() < 1e-15);
    }

    #[test]
    fn amplification_values() {
        let p = MaterialParams::default();
        assert_eq!(steady_amplification(0.0, &p), 1.0);
        // 2000 / (8314 · 297) per MPa
        let k: f64 = 2000.0 / (8314.0 * 297.0);
        assert!((steady_amplification(1000.0, &p) - (1000.0 * k).exp()).abs() < 1e-12);
        assert!((steady_amplification(1000.0, &p) - 2.2478).abs() < 1e-3);
        let a = steady_amplification(400.0, &p);
        assert!((steady_amplification(800.0, &p) - a * a).abs() < 1e-12);
    }

    #[test]
    fn unit_conversion() {
        assert!((ppm_to_molar(1.0) - 7.87e-3 / 1.008e6).abs() < 1e-24);
        assert!((molar_to_ppm(ppm_to_molar(3.7)) - 3.7).abs() < 1e-12);
    }

    #[test]
    fn schedule_interpolates_and_clamps() {
        let s = EnvSchedule::new(vec![(0.0, 0.0), (24.0, 7.0), (360.0, 3.0)]).unwrap();
        assert_eq!(s.eval(-1.0), 0.0);
        assert!((s.eval(12.0) - 3.5).abs() < 1e-12);
        assert_eq!(s.eval(24.0), 7.0);
        assert_eq!(s.eval(1000.0), 3.0);
        assert_eq!(s.peak(), (24.0, 7.0));
        assert!(EnvSchedule::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(EnvSchedule::new(vec![(0.0, -1.0)]).is_err());
    }

    fn slab(n: usize, len: f64) -> Mesh {
        let xs: Vec<f64> = (0..=n).map(|i| len * i as f64 / n as f64).collect();
        Mesh::structured(&xs, &[0.0, len / n as f64], Quadrature::Reduced).unwrap()
    }

    /// C/Cs for a membrane charged at x = 0 and drained at x = L.
    fn membrane(x: f64, tau: f64) -> f64 {
        let mut s = 1.0 - x;
        for n in 1..2000 {
            let nf = n as f64;
            s -= 2.0 / (PI * nf) * (nf * PI * x).sin() * (-nf * nf * PI * PI * tau).exp();
        }
        s
    }

    #[test]
    fn slab_transient_matches_series() {
        let len = 1.0;
        let m = slab(40, len);
        let mut dir = m.sets.left.clone();
        dir.extend_from_slice(&m.sets.right);
        let mut sys = DiffusionSystem::new(&m, &dir, false).unwrap();
        sys.set_boundary_value(1.0);
        for &n in &m.sets.right {
            sys.dofs.set_prescribed(n, 0, 0.0).unwrap();
        }
        let nq = m.n_elements() * m.points_per_element();
        let d = 1.4e-4;
        let dvec = vec![d; nq];
        let grad = vec![[0.0; 2]; nq];
        let field = TransportField { diffusivity: &dvec, grad_sigma_h: &grad, drift: 1.0 };
        let t_end = len * len / d;
        let dt = t_end / 20.0;
        let mut c = vec![0.0; m.n_nodes()];
        for _ in 0..20 {
            let prev = c.clone();
            step_diffusion(&m, &mut sys, field, &prev, &mut c, dt).unwrap();
        }
        let err: f64 = m.nodes.iter().zip(&c).map(|(x, v)| (v - membrane(x[0] / len, 1.0)).powi(2)).sum::<f64>()
            / m.n_nodes() as f64;
        assert!(err.sqrt() < 1e-3, "rms error {}", err.sqrt());
    }

    #[test]
    fn closed_system_conserves_mass() {
        let m = slab(12, 2.0);
        let p = MaterialParams::default();
        for lumped in [true, false] {
            let mut sys = DiffusionSystem::new(&m, &[], lumped).unwrap();
            let nq = m.n_elements() * m.points_per_element();
            let sigma: Vec<f64> = m.nodes.iter().map(|x| 500.0 * (x[0] * 2.0).sin()).collect();
            let grad = nodal_gradient_at_points(&m, &sigma);
            let dvec = vec![p.diffusivity; nq];
            let field = TransportField { diffusivity: &dvec, grad_sigma_h: &grad, drift: p.drift_coefficient() };
            let mut c: Vec<f64> = m.nodes.iter().map(|x| 1e-6 * (1.0 + x[0])).collect();
            let m0 = total_mass(&m, &c, lumped);
            for _ in 0..5 {
                let prev = c.clone();
                step_diffusion(&m, &mut sys, field, &prev, &mut c, 3600.0).unwrap();
                let m1 = total_mass(&m, &c, lumped);
                assert!((m1 - m0).abs() <= 1e-8 * m0);
            }
        }
    }

    #[test]
    fn uniform_stress_adds_no_drift() {
        let m = slab(6, 1.0);
        let p = MaterialParams::default();
        let nq = m.n_elements() * m.points_per_element();
        let mut sys = DiffusionSystem::new(&m, &m.sets.left, true).unwrap();
        sys.set_boundary_value(1.0);
        let sigma = vec![750.0; m.n_nodes()];
        let grad = nodal_gradient_at_points(&m, &sigma);
        let dvec = vec![p.diffusivity; nq];
        let prev = vec![0.0; m.n_nodes()];
        let mut a = vec![0.0; m.n_nodes()];
        let mut b = vec![0.0; m.n_nodes()];
        let with = TransportField { diffusivity: &dvec, grad_sigma_h: &grad, drift: p.drift_coefficient() };
        let without = TransportField { drift: 0.0, ..with };
        step_diffusion(&m, &mut sys, with, &prev, &mut a, 600.0).unwrap();
        step_diffusion(&m, &mut sys, without, &prev, &mut b, 600.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        let zero = vec![[0.0; 2]; nq];
        let exact_zero = TransportField { grad_sigma_h: &zero, ..with };
        step_diffusion(&m, &mut sys, exact_zero, &prev, &mut a, 600.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn steady_state_matches_equilibrium_enrichment() {
        let m = slab(30, 1.0);
        let p = MaterialParams::default();
        let nq = m.n_elements() * m.points_per_element();
        let mut sys = DiffusionSystem::new(&m, &m.sets.left, false).unwrap();
        sys.set_boundary_value(1.0);
        let sigma: Vec<f64> = m.nodes.iter().map(|x| 900.0 * (PI * x[0]).sin()).collect();
        let grad = nodal_gradient_at_points(&m, &sigma);
        let dvec = vec![p.diffusivity; nq];
        let field = TransportField { diffusivity: &dvec, grad_sigma_h: &grad, drift: p.drift_coefficient() };
        let mut c = vec![0.0; m.n_nodes()];
        step_diffusion(&m, &mut sys, field, &vec![0.0; m.n_nodes()], &mut c, f64::INFINITY).unwrap();
        for (n, x) in m.nodes.iter().enumerate() {
            let exact = steady_amplification(sigma[n], &p);
            assert!((c[n] - exact).abs() / exact < 1e-3, "x = {}: {} vs {}", x[0], c[n], exact);
        }
    }

    proptest! {
        #[test]
        fn fickian_limit_keeps_concentration_nonnegative(cs in 0.0f64..10.0, dt in 100.0f64..1e5) {
            let m = slab(8, 1.0);
            let nq = m.n_elements() * m.points_per_element();
            let mut sys = DiffusionSystem::new(&m, &m.sets.left, true).unwrap();
            sys.set_boundary_value(ppm_to_molar(cs));
            let dvec = vec![1.4e-4; nq];
            let grad = vec![[0.0; 2]; nq];
            let field = TransportField { diffusivity: &dvec, grad_sigma_h: &grad, drift: 0.0 };
            let mut c = vec![0.0; m.n_nodes()];
            let r = step_diffusion(&m, &mut sys, field, &vec![0.0; m.n_nodes()], &mut c, dt).unwrap();
            prop_assert!(r.min >= -ppm_to_molar(NEGATIVE_TOLERANCE_PPM));
        }

        #[test]
        fn schedule_stays_within_knot_values(t in -10.0f64..1000.0) {
            let s = EnvSchedule::new(vec![(0.0, 1.0), (24.0, 7.0), (360.0, 3.0)]).unwrap();
            let v = s.eval(t);
            prop_assert!((1.0..=7.0).contains(&v));
        }
    }
}
