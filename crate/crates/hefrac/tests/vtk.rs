use hefrac::vtk::{frame_name, Grid};
use hefrac_core::fem::{Mesh, Quadrature};
use proptest::prelude::*;

fn mesh() -> Mesh {
    Mesh::structured(&[0.0, 0.5, 1.25, 2.0], &[0.0, 0.3, 1.0], Quadrature::Reduced).unwrap()
}

fn grid_with(phi: Vec<f64>, cell: Vec<f64>) -> Grid {
    let m = mesh();
    let disp = m.nodes.iter().map(|x| [1e-3 * x[0], -2e-4 * x[1]]).collect();
    Grid {
        title: "test".into(),
        time: 3600.5,
        cycle: 7,
        point_scalars: vec![("phi".into(), phi)],
        point_vectors: vec![("displacement".into(), disp)],
        cell_scalars: vec![("history".into(), cell)],
        ..Grid::from_mesh(&m)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn phase_field_survives_bit_for_bit(bits in prop::collection::vec(any::<u64>(), 64), cell in prop::collection::vec(-1e9f64..1e9, 6)) {
        // arbitrary finite doubles, subnormals included
        let phi: Vec<f64> = bits[..mesh().n_nodes()].iter().map(|&b| f64::from_bits(b)).map(|v| if v.is_finite() { v } else { 0.5 }).collect();
        let g = grid_with(phi.clone(), cell);
        let back = Grid::parse(&g.to_vtk().unwrap()).unwrap();
        let read = back.point_scalar("phi").unwrap();
        prop_assert!(phi.iter().zip(read).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(back, g);
    }
}

#[test]
fn file_round_trip_leaves_no_partial() {
    let m = mesh();
    let g = grid_with(vec![0.25; m.n_nodes()], vec![1.0; m.n_elements()]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(frame_name(3, 7200.0));
    g.write(&path).unwrap();
    assert_eq!(Grid::read(&path).unwrap(), g);
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("frame_00003_t0002.0000h.vtk")]);
}

#[test]
fn mismatched_arrays_are_refused() {
    let m = mesh();
    let g = grid_with(vec![0.0; m.n_nodes() - 1], vec![0.0; m.n_elements()]);
    assert!(g.to_vtk().is_err());
}

#[test]
fn cells_are_quadratic_quads() {
    let m = mesh();
    let text = grid_with(vec![0.0; m.n_nodes()], vec![0.0; m.n_elements()]).to_vtk().unwrap();
    assert!(text.contains("CELL_TYPES 6\n23\n"));
    assert!(Grid::parse(&text.replace("\n23\n", "\n9\n")).is_err());
}
