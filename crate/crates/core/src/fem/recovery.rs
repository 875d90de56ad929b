//! Nodal recovery of quadrature-point fields.
//!
//! Each element fits a bilinear polynomial {1, ξ, η, ξη} to its Gauss-point
//! values by least squares (interpolation for 2×2 points), evaluates it at its
//! nodes, and nodal values are averaged over the elements sharing the node.

use alloc::vec;
use alloc::vec::Vec;

use super::element::NODE_XI;
use super::mesh::Mesh;

/// 8 × nqp matrix mapping Gauss-point values to element nodal values.
fn extrapolation(mesh: &Mesh) -> Vec<[f64; 8]> {
    let rule = mesh.quadrature.rule();
    let basis = |xi: f64, eta: f64| [1.0, xi, eta, xi * eta];
    // normal matrix PᵀP, diagonal for tensor Gauss rules but inverted generally
    let mut ptp = [[0.0; 4]; 4];
    for &(xi, eta, _) in &rule {
        let p = basis(xi, eta);
        for a in 0..4 {
            for b in 0..4 {
                ptp[a][b] += p[a] * p[b];
            }
        }
    }
    let inv = invert4(ptp);
    let mut out = vec![[0.0; 8]; rule.len()];
    for (k, &(xi, eta, _)) in rule.iter().enumerate() {
        let pk = basis(xi, eta);
        let mut c = [0.0; 4];
        for a in 0..4 {
            c[a] = (0..4).map(|b| inv[a][b] * pk[b]).sum();
        }
        for (n, x) in NODE_XI.iter().enumerate() {
            let pn = basis(x[0], x[1]);
            out[k][n] = (0..4).map(|a| pn[a] * c[a]).sum();
        }
    }
    out
}

fn invert4(m: [[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut a = m;
    let mut inv = [[0.0; 4]; 4];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for c in 0..4 {
        let p = (c..4).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap_or(c);
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for k in 0..4 {
            a[c][k] /= d;
            inv[c][k] /= d;
        }
        for r in 0..4 {
            if r != c {
                let f = a[r][c];
                for k in 0..4 {
                    a[r][k] -= f * a[c][k];
                    inv[r][k] -= f * inv[c][k];
                }
            }
        }
    }
    inv
}

/// Continuous nodal field from values stored per quadrature point
/// (element-major, `points_per_element` per element).
pub fn recover_nodal(mesh: &Mesh, qp_values: &[f64]) -> Vec<f64> {
    let nqp = mesh.points_per_element();
    assert_eq!(qp_values.len(), mesh.n_elements() * nqp, "one value per quadrature point");
    let ex = extrapolation(mesh);
    let mut sum = vec![0.0; mesh.n_nodes()];
    let mut count = vec![0u32; mesh.n_nodes()];
    for (e, conn) in mesh.elements.iter().enumerate() {
        let v = &qp_values[e * nqp..(e + 1) * nqp];
        for (a, &n) in conn.iter().enumerate() {
            sum[n] += (0..nqp).map(|k| ex[k][a] * v[k]).sum::<f64>();
            count[n] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect()
}

/// Gradient of an interpolated nodal field at every quadrature point.
pub fn nodal_gradient_at_points(mesh: &Mesh, nodal: &[f64]) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(mesh.n_elements() * mesh.points_per_element());
    for (e, conn) in mesh.elements.iter().enumerate() {
        for q in mesh.quad_points(e) {
            let mut g = [0.0; 2];
            for (a, &n) in conn.iter().enumerate() {
                g[0] += q.dndx[a][0] * nodal[n];
                g[1] += q.dndx[a][1] * nodal[n];
            }
            out.push(g);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Quadrature;

    #[test]
    fn bilinear_fields_are_recovered_exactly() {
        for quad in [Quadrature::Reduced, Quadrature::Full] {
            let m = Mesh::structured(&[0.0, 0.5, 1.5, 2.0], &[0.0, 1.0, 1.7], quad).unwrap();
            let f = |x: [f64; 2]| 3.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1];
            let qp: Vec<f64> = (0..m.n_elements())
                .flat_map(|e| m.quad_points(e).iter().map(|q| f(q.x)).collect::<Vec<_>>())
                .collect();
            let nodal = recover_nodal(&m, &qp);
            for (n, x) in m.nodes.iter().enumerate() {
                assert!((nodal[n] - f(*x)).abs() < 1e-12, "node {n}");
            }
            let g = nodal_gradient_at_points(&m, &nodal);
            for (k, q) in (0..m.n_elements()).flat_map(|e| m.quad_points(e).iter()).enumerate() {
                assert!((g[k][0] - (2.0 + 0.5 * q.x[1])).abs() < 1e-11);
                assert!((g[k][1] - (-1.0 + 0.5 * q.x[0])).abs() < 1e-11);
            }
        }
    }
}
