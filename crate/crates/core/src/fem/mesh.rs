//! Quadrilateral meshes and the structured SENT mesher.
//!
//! The SENT mesher builds a tensor-product grid of Q8 elements over the upper
//! half of the specimen, x ∈ [0, W], y ∈ [0, H/2]. The y = 0 line carries the
//! crack faces (x < a0, traction free) and the symmetry ligament (x ≥ a0).
//! A band of uniform elements of size ℓ/`size_ratio` surrounds the expected
//! crack path; outside it the spacing grows geometrically.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::element::{quad_point, QuadPoint, Quadrature};
use super::ordering;
use crate::error::{Error, Result};

const COORD_TOL: f64 = 1e-9;

/// Named node groups. Edge lists are sorted along the edge.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundarySets {
    /// y = 0, x ≥ a0: symmetry line, u_y = 0.
    pub ligament: Vec<usize>,
    /// y = 0, x < a0: traction-free crack faces.
    pub crack_face: Vec<usize>,
    pub top: Vec<usize>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    /// Outer boundary plus crack faces, sorted and deduplicated.
    pub exposed: Vec<usize>,
}

/// Region of uniform refinement along the crack path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandInfo {
    pub x_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub target_size: f64,
}

/// SENT geometry a mesh was generated for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentGeometry {
    pub width: f64,
    pub half_height: f64,
    pub crack_length: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 8]>,
    pub quadrature: Quadrature,
    pub sets: BoundarySets,
    pub band: Option<BandInfo>,
    pub sent: Option<SentGeometry>,
    qp: Vec<QuadPoint>,
    nqp: usize,
    /// `order[k]` is the node at bandwidth-reducing position k.
    order: Vec<usize>,
}

impl Mesh {
    /// Builds the quadrature cache and node ordering. Fails with a geometry
    /// error naming the first element with a non-positive Jacobian.
    pub fn new(nodes: Vec<[f64; 2]>, elements: Vec<[usize; 8]>, quadrature: Quadrature) -> Result<Self> {
        let rule = quadrature.rule();
        let nqp = rule.len();
        let mut qp = Vec::with_capacity(elements.len() * nqp);
        for (e, conn) in elements.iter().enumerate() {
            let mut coords = [[0.0; 2]; 8];
            for (c, &n) in coords.iter_mut().zip(conn) {
                *c = *nodes
                    .get(n)
                    .ok_or_else(|| Error::Geometry(format!("element {e} references missing node {n}")))?;
            }
            for &(xi, eta, w) in &rule {
                let p = quad_point(&coords, xi, eta, w).ok_or_else(|| {
                    Error::Geometry(format!("element {e} has a non-positive Jacobian at ({xi:.3}, {eta:.3})"))
                })?;
                qp.push(p);
            }
        }
        let (ptr, adj) = ordering::node_graph(nodes.len(), &elements);
        let order = ordering::reverse_cuthill_mckee(&ptr, &adj);
        Ok(Self {
            nodes,
            elements,
            quadrature,
            sets: BoundarySets::default(),
            band: None,
            sent: None,
            qp,
            nqp,
            order,
        })
    }

    /// Tensor-product mesh on the grid lines `xs` × `ys` (both increasing).
    /// Sets `left`, `right`, `top` are filled; the bottom edge is returned in
    /// `ligament` so callers can split it.
    pub fn structured(xs: &[f64], ys: &[f64], quadrature: Quadrature) -> Result<Self> {
        if xs.len() < 2 || ys.len() < 2 {
            return Err(Error::Geometry("structured mesh needs at least one element per direction".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || ys.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Geometry("grid lines must be strictly increasing".into()));
        }
        let (nx, ny) = (xs.len() - 1, ys.len() - 1);
        let nc = (nx + 1) * (ny + 1);
        let nh = nx * (ny + 1);
        let corner = |i: usize, j: usize| j * (nx + 1) + i;
        let hmid = |i: usize, j: usize| nc + j * nx + i;
        let vmid = |i: usize, j: usize| nc + nh + j * (nx + 1) + i;

        let mut nodes = vec![[0.0; 2]; nc + nh + (nx + 1) * ny];
        for j in 0..=ny {
            for i in 0..=nx {
                nodes[corner(i, j)] = [xs[i], ys[j]];
                if i < nx {
                    nodes[hmid(i, j)] = [0.5 * (xs[i] + xs[i + 1]), ys[j]];
                }
                if j < ny {
                    nodes[vmid(i, j)] = [xs[i], 0.5 * (ys[j] + ys[j + 1])];
                }
            }
        }
        let mut elements = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                elements.push([
                    corner(i, j),
                    corner(i + 1, j),
                    corner(i + 1, j + 1),
                    corner(i, j + 1),
                    hmid(i, j),
                    vmid(i + 1, j),
                    hmid(i, j + 1),
                    vmid(i, j),
                ]);
            }
        }
        let mut mesh = Mesh::new(nodes, elements, quadrature)?;

        let mut bottom = Vec::with_capacity(2 * nx + 1);
        let mut top = Vec::with_capacity(2 * nx + 1);
        for i in 0..=nx {
            bottom.push(corner(i, 0));
            top.push(corner(i, ny));
            if i < nx {
                bottom.push(hmid(i, 0));
                top.push(hmid(i, ny));
            }
        }
        let mut left = Vec::with_capacity(2 * ny + 1);
        let mut right = Vec::with_capacity(2 * ny + 1);
        for j in 0..=ny {
            left.push(corner(0, j));
            right.push(corner(nx, j));
            if j < ny {
                left.push(vmid(0, j));
                right.push(vmid(nx, j));
            }
        }
        let mut exposed: Vec<usize> = left.iter().chain(&right).chain(&top).copied().collect();
        exposed.sort_unstable();
        exposed.dedup();
        mesh.sets = BoundarySets {
            ligament: bottom,
            crack_face: Vec::new(),
            top,
            left,
            right,
            exposed,
        };
        Ok(mesh)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn points_per_element(&self) -> usize {
        self.nqp
    }

    /// Quadrature points of element `e`.
    pub fn quad_points(&self, e: usize) -> &[QuadPoint] {
        &self.qp[e * self.nqp..(e + 1) * self.nqp]
    }

    /// Node visiting order that keeps assembled profiles narrow.
    pub fn node_order(&self) -> &[usize] {
        &self.order
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 8] {
        let mut c = [[0.0; 2]; 8];
        for (k, &n) in self.elements[e].iter().enumerate() {
            c[k] = self.nodes[n];
        }
        c
    }

    /// Longest straight corner-to-corner edge of element `e`.
    pub fn max_edge_length(&self, e: usize) -> f64 {
        let c = self.element_coords(e);
        (0..4)
            .map(|k| {
                let (a, b) = (c[k], c[(k + 1) % 4]);
                libm::hypot(b[0] - a[0], b[1] - a[1])
            })
            .fold(0.0, f64::max)
    }

    pub fn min_edge_length(&self, e: usize) -> f64 {
        let c = self.element_coords(e);
        (0..4)
            .map(|k| {
                let (a, b) = (c[k], c[(k + 1) % 4]);
                libm::hypot(b[0] - a[0], b[1] - a[1])
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let c = self.element_coords(e);
        [
            0.25 * (c[0][0] + c[1][0] + c[2][0] + c[3][0]),
            0.25 * (c[0][1] + c[1][1] + c[2][1] + c[3][1]),
        ]
    }

    /// Elements lying entirely inside the refined band.
    pub fn band_elements(&self) -> Vec<usize> {
        let Some(b) = self.band else {
            return Vec::new();
        };
        (0..self.n_elements())
            .filter(|&e| {
                self.element_coords(e).iter().all(|p| {
                    p[0] >= b.x_min - COORD_TOL && p[0] <= b.x_max + COORD_TOL && p[1] <= b.y_max + COORD_TOL
                })
            })
            .collect()
    }

    pub fn area(&self) -> f64 {
        self.qp.iter().map(|q| q.weight).sum()
    }

    pub fn stats(&self) -> MeshStats {
        let band = self.band_elements();
        let max_band_edge = band.iter().map(|&e| self.max_edge_length(e)).fold(0.0, f64::max);
        let (mut hmin, mut hmax, mut aspect) = (f64::INFINITY, 0.0_f64, 0.0_f64);
        for e in 0..self.n_elements() {
            let (lo, hi) = (self.min_edge_length(e), self.max_edge_length(e));
            hmin = hmin.min(lo);
            hmax = hmax.max(hi);
            aspect = aspect.max(hi / lo);
        }
        let min_weight = self.qp.iter().map(|q| q.weight).fold(f64::INFINITY, f64::min);
        MeshStats {
            nodes: self.n_nodes(),
            elements: self.n_elements(),
            band_elements: band.len(),
            max_band_edge,
            min_edge: hmin,
            max_edge: hmax,
            max_aspect_ratio: aspect,
            min_quadrature_weight: min_weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeshStats {
    pub nodes: usize,
    pub elements: usize,
    pub band_elements: usize,
    pub max_band_edge: f64,
    pub min_edge: f64,
    pub max_edge: f64,
    pub max_aspect_ratio: f64,
    pub min_quadrature_weight: f64,
}

/// Parameters of the SENT half-model mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SentMeshSpec {
    /// Specimen width W, mm.
    pub width: f64,
    /// Height of the modelled half, mm.
    pub half_height: f64,
    /// Initial crack length a0, mm.
    pub crack_length: f64,
    /// Phase-field length scale ℓ, mm.
    pub length_scale: f64,
    /// Band elements have size ℓ / size_ratio.
    pub size_ratio: f64,
    /// Band extent ahead of the tip, mm (clipped to the ligament).
    pub band_ahead: f64,
    /// Band extent behind the tip, mm.
    pub band_behind: f64,
    /// Band height above the crack plane, mm.
    pub band_height: f64,
    /// Geometric growth ratio of element size outside the band.
    pub coarsening: f64,
    /// Upper bound on element size, mm.
    pub max_size: f64,
    pub element_budget: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub quadrature: Quadrature,
}

impl SentMeshSpec {
    /// Full-fidelity mesh: the whole ligament is refined (about 15,000 elements
    /// for the 7 mm specimen).
    pub fn paper(width: f64, half_height: f64, crack_length: f64, length_scale: f64) -> Self {
        Self {
            width,
            half_height,
            crack_length,
            length_scale,
            size_ratio: 5.0,
            band_ahead: width,
            band_behind: 0.25,
            band_height: 0.55,
            coarsening: 1.15,
            max_size: 0.5,
            element_budget: 40_000,
            quadrature: Quadrature::Reduced,
        }
    }

    /// Workstation-scale mesh: band elements of exactly ℓ/5 over the first
    /// millimetre of the ligament only.
    pub fn desk(width: f64, half_height: f64, crack_length: f64, length_scale: f64) -> Self {
        Self {
            width,
            half_height,
            crack_length,
            length_scale,
            size_ratio: 5.0,
            band_ahead: 1.0,
            band_behind: 0.1,
            band_height: 0.1,
            coarsening: 1.3,
            max_size: 1.0,
            element_budget: 10_000,
            quadrature: Quadrature::Reduced,
        }
    }

    pub fn target_size(&self) -> f64 {
        self.length_scale / self.size_ratio
    }
}

/// `n` equal intervals of size at most `h` covering [a, b] (excluding a).
fn uniform_lines(a: f64, b: f64, h: f64, out: &mut Vec<f64>) {
    let n = libm::ceil((b - a) / h - 1e-9).max(1.0) as usize;
    for k in 1..=n {
        out.push(a + (b - a) * k as f64 / n as f64);
    }
}

/// Interval sizes growing geometrically from `h0` that tile `length`.
fn graded_sizes(length: f64, h0: f64, growth: f64, hmax: f64) -> Vec<f64> {
    if length <= COORD_TOL {
        return Vec::new();
    }
    let mut sizes = Vec::new();
    let mut s = h0;
    let mut total = 0.0;
    while total < length {
        s = (s * growth).min(hmax);
        sizes.push(s);
        total += s;
    }
    // keep whichever count lands closer to the target length
    if sizes.len() > 1 {
        let last = sizes[sizes.len() - 1];
        if total - length > length - (total - last) {
            sizes.pop();
            total -= last;
        }
    }
    let scale = length / total;
    sizes.iter_mut().for_each(|v| *v *= scale);
    sizes
}

/// Builds the half SENT mesh: crack faces on y = 0 for x < a0, symmetry
/// ligament for x ≥ a0, rigid top edge at y = half_height.
pub fn build_sent_mesh(spec: &SentMeshSpec) -> Result<Mesh> {
    let (w, h, a0, ell) = (spec.width, spec.half_height, spec.crack_length, spec.length_scale);
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::Geometry(format!("width {w} and height {h} must be positive")));
    }
    if !(a0 > 0.0 && a0 < w) {
        return Err(Error::Geometry(format!("crack length {a0} must lie in (0, {w})")));
    }
    if !(ell > 0.0) || !(spec.size_ratio > 0.0) {
        return Err(Error::Geometry("length scale and size ratio must be positive".into()));
    }
    if !(spec.coarsening >= 1.0) || !(spec.max_size > 0.0) {
        return Err(Error::Config("coarsening must be >= 1 and max_size positive".into()));
    }
    let hf = spec.target_size();
    let x_lo = (a0 - spec.band_behind.max(0.0)).max(0.0);
    let x_hi = (a0 + spec.band_ahead.max(hf)).min(w);
    let y_hi = spec.band_height.max(hf).min(h);

    let mut xs = Vec::new();
    // left of band, growing towards x = 0
    let left = graded_sizes(x_lo, hf, spec.coarsening, spec.max_size);
    let mut x = 0.0;
    xs.push(0.0);
    for s in left.iter().rev() {
        x += s;
        xs.push(x);
    }
    if let Some(last) = xs.last_mut() {
        *last = x_lo;
    }
    if x_lo < a0 {
        uniform_lines(x_lo, a0, hf, &mut xs);
    }
    uniform_lines(a0, x_hi, hf, &mut xs);
    let right = graded_sizes(w - x_hi, hf, spec.coarsening, spec.max_size);
    let mut x = x_hi;
    for s in &right {
        x += s;
        xs.push(x);
    }
    if let Some(last) = xs.last_mut() {
        *last = w;
    }

    let mut ys = vec![0.0];
    uniform_lines(0.0, y_hi, hf, &mut ys);
    let up = graded_sizes(h - y_hi, hf, spec.coarsening, spec.max_size);
    let mut y = y_hi;
    for s in &up {
        y += s;
        ys.push(y);
    }
    if let Some(last) = ys.last_mut() {
        *last = h;
    }

    let count = (xs.len() - 1) * (ys.len() - 1);
    if count > spec.element_budget {
        return Err(Error::Config(format!(
            "refinement to h = {hf:.4} mm needs {count} elements, budget is {}",
            spec.element_budget
        )));
    }

    let mut mesh = Mesh::structured(&xs, &ys, spec.quadrature)?;
    let bottom = core::mem::take(&mut mesh.sets.ligament);
    let (crack, lig): (Vec<usize>, Vec<usize>) = bottom
        .into_iter()
        .partition(|&n| mesh.nodes[n][0] < a0 - COORD_TOL);
    mesh.sets.ligament = lig;
    mesh.sets.crack_face = crack;
    let mut exposed = mesh.sets.exposed.clone();
    exposed.extend_from_slice(&mesh.sets.crack_face);
    exposed.sort_unstable();
    exposed.dedup();
    mesh.sets.exposed = exposed;
    mesh.band = Some(BandInfo {
        x_min: x_lo,
        x_max: x_hi,
        y_max: y_hi,
        target_size: hf,
    });
    mesh.sent = Some(SentGeometry {
        width: w,
        half_height: h,
        crack_length: a0,
    });
    Ok(mesh)
}
