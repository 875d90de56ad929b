//! Global equilibrium of the degraded elastoplastic solid under a load
//! applied through a rigid top edge.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::{clamp_phi, degradation, return_map_plane, Degradation, PlasticState};
use crate::error::{Error, Result};
use crate::fem::{DofMap, Mesh, Profile, SparseSystem};
use crate::material::MaterialParams;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct MechanicsOptions {
    /// Stiffness floor κ: moduli use (1 − κ) g + κ so that fully broken
    /// material keeps the system nonsingular.
    pub residual_stiffness: f64,
    /// Newton stops when ‖R‖ ≤ tolerance × reference force.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Keep iterating with the last factorized tangent while the residual
    /// contracts by at least `reuse_contraction` per iteration.
    pub reuse_tangent: bool,
    pub reuse_contraction: f64,
}

impl Default for MechanicsOptions {
    fn default() -> Self {
        Self {
            residual_stiffness: 1e-7,
            tolerance: 1e-8,
            max_iterations: 30,
            reuse_tangent: true,
            reuse_contraction: 0.2,
        }
    }
}

/// Displacement equations of a mesh plus the reusable matrix storage.
#[derive(Debug, Clone)]
pub struct MechanicsSystem {
    pub dofs: DofMap,
    pub system: SparseSystem,
    /// Equation shared by the tied top-edge u_y slots, loaded by P/B.
    pub master: Option<usize>,
}

impl MechanicsSystem {
    pub fn new(mesh: &Mesh, dofs: DofMap, master: Option<usize>) -> Self {
        let mut eqs = vec![None; 16];
        let lists: Vec<Vec<Option<usize>>> = mesh
            .elements
            .iter()
            .map(|conn| {
                dofs.element_equations(conn, &mut eqs);
                eqs.clone()
            })
            .collect();
        let profile = Arc::new(Profile::from_elements(dofs.n_eq(), lists.iter().map(|v| &v[..])));
        let mut system = SparseSystem::new(profile, true);
        system.positive_definite = false;
        Self { dofs, system, master }
    }

    /// SENT half model: u_y = 0 on the ligament, u_x = 0 and a common u_y on
    /// the top edge.
    pub fn sent(mesh: &Mesh) -> Result<Self> {
        let s = &mesh.sets;
        if s.top.is_empty() {
            return Err(Error::Config("mesh has no top-edge node set".into()));
        }
        if s.ligament.is_empty() {
            return Err(Error::Config("mesh has no ligament node set".into()));
        }
        let dofs = DofMap::builder(mesh, 2)
            .fix_nodes(&s.ligament, 1, 0.0)
            .fix_nodes(&s.top, 0, 0.0)
            .tie(&s.top, 1)
            .build()?;
        let master = match dofs.slot(s.top[0], 1) {
            crate::fem::Slot::Free(eq) => Some(eq),
            crate::fem::Slot::Fixed => None,
        };
        Ok(Self::new(mesh, dofs, master))
    }

    /// Common vertical displacement of the top edge.
    pub fn master_displacement(&self, mesh: &Mesh, u: &[f64]) -> f64 {
        mesh.sets.top.first().map_or(0.0, |&n| u[2 * n + 1])
    }
}

/// Outcome of one assembly.
#[derive(Debug, Clone)]
pub struct Assembly {
    /// Out-of-balance force per equation, f_int − f_ext.
    pub residual: Vec<f64>,
    /// Internal nodal forces per slot.
    pub internal: Vec<f64>,
    /// Updated integration-point states (not yet committed).
    pub states: Vec<PlasticState>,
}

#[inline]
fn mech_degradation(phi: f64, p: &MaterialParams, kappa: f64) -> Result<Degradation> {
    let d = degradation(phi, p.stored_plastic_fraction)?;
    Ok(Degradation {
        g: (1.0 - kappa) * d.g + kappa,
        g_bar: d.g_bar,
    })
}

/// Residual and consistent tangent at displacement `u` (slot vector with
/// prescribed values in place). The tangent is written to `sys.system`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_mechanics(
    mesh: &Mesh,
    sys: &mut MechanicsSystem,
    u: &[f64],
    phi: &[f64],
    committed: &[PlasticState],
    p: &MaterialParams,
    opts: &MechanicsOptions,
    load_per_thickness: f64,
) -> Result<Assembly> {
    assemble(mesh, sys, u, phi, committed, p, opts, load_per_thickness, true)
}

/// With `tangent == false` only the residual is formed and the matrix (and
/// any factorization it holds) is left untouched.
#[allow(clippy::too_many_arguments)]
fn assemble(
    mesh: &Mesh,
    sys: &mut MechanicsSystem,
    u: &[f64],
    phi: &[f64],
    committed: &[PlasticState],
    p: &MaterialParams,
    opts: &MechanicsOptions,
    load_per_thickness: f64,
    tangent: bool,
) -> Result<Assembly> {
    let nqp = mesh.points_per_element();
    let mut internal = vec![0.0; sys.dofs.n_slots()];
    let mut states = Vec::with_capacity(committed.len());
    if tangent {
        sys.system.reset();
    }
    let mut eqs = [None; 16];
    let mut ke = [0.0; 256];
    for (e, conn) in mesh.elements.iter().enumerate() {
        let mut ue = [0.0; 16];
        let mut pe = [0.0; 8];
        for (a, &n) in conn.iter().enumerate() {
            ue[2 * a] = u[2 * n];
            ue[2 * a + 1] = u[2 * n + 1];
            pe[a] = clamp_phi(phi[n])?;
        }
        let mut fe = [0.0; 16];
        ke.iter_mut().for_each(|v| *v = 0.0);
        for (k, q) in mesh.quad_points(e).iter().enumerate() {
            let mut strain = [0.0; 3];
            let mut phi_q = 0.0;
            for a in 0..8 {
                let (dx, dy) = (q.dndx[a][0], q.dndx[a][1]);
                strain[0] += dx * ue[2 * a];
                strain[1] += dy * ue[2 * a + 1];
                strain[2] += dy * ue[2 * a] + dx * ue[2 * a + 1];
                phi_q += q.n[a] * pe[a];
            }
            // serendipity interpolation of a sharp nodal field undershoots
            let deg = mech_degradation(phi_q.clamp(0.0, 1.0), p, opts.residual_stiffness)?;
            let upd = return_map_plane(strain, &committed[e * nqp + k], deg, p)?;
            let s = [upd.stress[0], upd.stress[1], upd.stress[3]];
            let d = &upd.tangent;
            let w = q.weight;
            // B columns: node a, x → (dx, 0, dy); y → (0, dy, dx)
            let mut db = [[0.0; 3]; 16];
            for a in 0..8 {
                let (dx, dy) = (q.dndx[a][0], q.dndx[a][1]);
                for i in 0..3 {
                    db[2 * a][i] = d[i][0] * dx + d[i][2] * dy;
                    db[2 * a + 1][i] = d[i][1] * dy + d[i][2] * dx;
                }
                fe[2 * a] += w * (dx * s[0] + dy * s[2]);
                fe[2 * a + 1] += w * (dy * s[1] + dx * s[2]);
            }
            if !tangent {
                for a in 0..8 {
                    let (dx, dy) = (q.dndx[a][0], q.dndx[a][1]);
                    fe[2 * a] += w * (dx * s[0] + dy * s[2]);
                    fe[2 * a + 1] += w * (dy * s[1] + dx * s[2]);
                }
                states.push(upd.state);
                continue;
            }
            for a in 0..8 {
                let (dx, dy) = (q.dndx[a][0], q.dndx[a][1]);
                for b in 0..16 {
                    let c = &db[b];
                    ke[(2 * a) * 16 + b] += w * (dx * c[0] + dy * c[2]);
                    ke[(2 * a + 1) * 16 + b] += w * (dy * c[1] + dx * c[2]);
                }
            }
            states.push(upd.state);
        }
        if fe.iter().chain(ke.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericalBreakdown { element: e });
        }
        for (a, &n) in conn.iter().enumerate() {
            internal[2 * n] += fe[2 * a];
            internal[2 * n + 1] += fe[2 * a + 1];
        }
        if tangent {
            sys.dofs.element_equations(conn, &mut eqs);
            sys.system.matrix.add_element(&eqs, &ke);
        }
    }
    let mut residual = sys.dofs.gather_to_equations(&internal);
    if let Some(m) = sys.master {
        residual[m] -= load_per_thickness;
    }
    for (r, v) in sys.system.rhs.iter_mut().zip(&residual) {
        *r = -v;
    }
    Ok(Assembly {
        residual,
        internal,
        states,
    })
}

/// Converged equilibrium.
#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub iterations: usize,
    pub residual_norm: f64,
    pub states: Vec<PlasticState>,
    /// Sum of vertical reactions on the ligament (per unit thickness).
    pub ligament_reaction: f64,
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Halvings of a Newton correction tried when the constitutive update fails.
const MAX_BACKTRACKS: usize = 6;

/// Newton iteration for equilibrium at fixed phase field. `u` is updated in
/// place and holds the converged displacement on success.
#[allow(clippy::too_many_arguments)]
pub fn solve_equilibrium(
    mesh: &Mesh,
    sys: &mut MechanicsSystem,
    u: &mut [f64],
    phi: &[f64],
    committed: &[PlasticState],
    p: &MaterialParams,
    opts: &MechanicsOptions,
    load_per_thickness: f64,
) -> Result<EquilibriumReport> {
    sys.dofs.impose(u);
    let mut it = 0;
    // modified Newton on the last factorization while it contracts well
    let mut reuse = opts.reuse_tangent && sys.system.matrix.is_factored();
    let mut previous = f64::INFINITY;
    // (displacements before, correction) of the last update, for backtracking
    let mut last: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut cuts = 0;
    loop {
        let asm = match assemble(mesh, sys, u, phi, committed, p, opts, load_per_thickness, !reuse) {
            Ok(a) => a,
            Err(e @ (Error::LocalSolve { .. } | Error::NumericalBreakdown { .. })) => {
                // an overshooting correction: retry half of it on a fresh tangent
                let Some((u0, du)) = last.as_mut() else { return Err(e) };
                if cuts == MAX_BACKTRACKS {
                    return Err(e);
                }
                cuts += 1;
                du.iter_mut().for_each(|d| *d *= 0.5);
                u.copy_from_slice(u0);
                sys.dofs.add_increment(du, u);
                reuse = false;
                previous = f64::INFINITY;
                continue;
            }
            Err(e) => return Err(e),
        };
        cuts = 0;
        let r = norm(&asm.residual);
        let reaction: f64 = mesh.sets.ligament.iter().map(|&n| asm.internal[2 * n + 1]).sum();
        let reference = load_per_thickness.abs().max(reaction.abs()).max(1e-12 * p.youngs_modulus);
        if r <= opts.tolerance * reference {
            return Ok(EquilibriumReport {
                iterations: it,
                residual_norm: r,
                states: asm.states,
                ligament_reaction: reaction,
            });
        }
        if it == opts.max_iterations {
            return Err(Error::Equilibrium(format!(
                "residual {r:e} (reference {reference:e}) after {it} Newton iterations"
            )));
        }
        if reuse && r > opts.reuse_contraction * previous {
            reuse = false;
            previous = f64::INFINITY;
            continue;
        }
        previous = r;
        let du = if reuse {
            let sol = &mut sys.system.solution;
            sol.clear();
            sol.extend_from_slice(&sys.system.rhs);
            sys.system.matrix.solve_in_place(sol)?;
            &sys.system.solution[..]
        } else {
            reuse = opts.reuse_tangent;
            crate::fem::solve_linear(&mut sys.system)?
        };
        if du.iter().any(|v| !v.is_finite()) {
            return Err(Error::Equilibrium("non-finite Newton correction".into()));
        }
        last = Some((u.to_vec(), du.to_vec()));
        sys.dofs.add_increment(du, u);
        it += 1;
    }
}
