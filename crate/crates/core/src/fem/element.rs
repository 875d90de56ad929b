//! Eight-node serendipity quadrilateral and its Gauss rules.

use alloc::vec::Vec;

/// Natural coordinates of the Q8 nodes: corners counter-clockwise, then the
/// mid-side nodes of edges 0-1, 1-2, 2-3, 3-0.
pub const NODE_XI: [[f64; 2]; 8] = [
    [-1.0, -1.0],
    [1.0, -1.0],
    [1.0, 1.0],
    [-1.0, 1.0],
    [0.0, -1.0],
    [1.0, 0.0],
    [0.0, 1.0],
    [-1.0, 0.0],
];

/// Integration rule used for every element of a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Quadrature {
    /// 2×2 Gauss points (reduced integration for Q8).
    #[default]
    Reduced,
    /// 3×3 Gauss points.
    Full,
}

impl Quadrature {
    pub fn points_per_element(self) -> usize {
        match self {
            Quadrature::Reduced => 4,
            Quadrature::Full => 9,
        }
    }

    /// (ξ, η, weight) triples.
    pub fn rule(self) -> Vec<(f64, f64, f64)> {
        let (pts, wts): (&[f64], &[f64]) = match self {
            Quadrature::Reduced => {
                const A: f64 = 0.577_350_269_189_625_8;
                (&[-A, A], &[1.0, 1.0])
            }
            Quadrature::Full => {
                const A: f64 = 0.774_596_669_241_483_4;
                (&[-A, 0.0, A], &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
            }
        };
        let mut out = Vec::with_capacity(pts.len() * pts.len());
        for (j, &eta) in pts.iter().enumerate() {
            for (i, &xi) in pts.iter().enumerate() {
                out.push((xi, eta, wts[i] * wts[j]));
            }
        }
        out
    }
}

pub fn shape(xi: f64, eta: f64) -> [f64; 8] {
    let mut n = [0.0; 8];
    for (c, nc) in NODE_XI.iter().take(4).zip(n.iter_mut()) {
        let (a, b) = (xi * c[0], eta * c[1]);
        *nc = 0.25 * (1.0 + a) * (1.0 + b) * (a + b - 1.0);
    }
    n[4] = 0.5 * (1.0 - xi * xi) * (1.0 - eta);
    n[5] = 0.5 * (1.0 + xi) * (1.0 - eta * eta);
    n[6] = 0.5 * (1.0 - xi * xi) * (1.0 + eta);
    n[7] = 0.5 * (1.0 - xi) * (1.0 - eta * eta);
    n
}

/// Derivatives with respect to (ξ, η).
pub fn shape_derivatives(xi: f64, eta: f64) -> [[f64; 2]; 8] {
    let mut d = [[0.0; 2]; 8];
    for (c, dc) in NODE_XI.iter().take(4).zip(d.iter_mut()) {
        let (a, b) = (xi * c[0], eta * c[1]);
        dc[0] = 0.25 * c[0] * (1.0 + b) * (2.0 * a + b);
        dc[1] = 0.25 * c[1] * (1.0 + a) * (a + 2.0 * b);
    }
    d[4] = [-xi * (1.0 - eta), -0.5 * (1.0 - xi * xi)];
    d[5] = [0.5 * (1.0 - eta * eta), -(1.0 + xi) * eta];
    d[6] = [-xi * (1.0 + eta), 0.5 * (1.0 - xi * xi)];
    d[7] = [-0.5 * (1.0 - eta * eta), -(1.0 - xi) * eta];
    d
}

/// Geometry of one quadrature point, precomputed once per mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub n: [f64; 8],
    /// Cartesian shape-function gradients.
    pub dndx: [[f64; 2]; 8],
    /// |J| times the Gauss weight.
    pub weight: f64,
    pub x: [f64; 2],
    /// Natural coordinates, used by nodal recovery.
    pub xi: [f64; 2],
}

/// Evaluates a quadrature point; returns `None` when det J ≤ 0.
pub fn quad_point(coords: &[[f64; 2]; 8], xi: f64, eta: f64, w: f64) -> Option<QuadPoint> {
    let n = shape(xi, eta);
    let dn = shape_derivatives(xi, eta);
    let mut j = [[0.0; 2]; 2];
    let mut x = [0.0; 2];
    for a in 0..8 {
        for r in 0..2 {
            x[r] += n[a] * coords[a][r];
            for s in 0..2 {
                j[r][s] += dn[a][s] * coords[a][r];
            }
        }
    }
    // j[r][s] = dx_r / dξ_s
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if !(det > 0.0) {
        return None;
    }
    let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
    let mut dndx = [[0.0; 2]; 8];
    for a in 0..8 {
        for r in 0..2 {
            dndx[a][r] = dn[a][0] * inv[0][r] + dn[a][1] * inv[1][r];
        }
    }
    Some(QuadPoint {
        n,
        dndx,
        weight: det * w,
        x,
        xi: [xi, eta],
    })
}
