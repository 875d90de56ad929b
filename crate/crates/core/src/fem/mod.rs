//! Finite-element infrastructure shared by the three field problems.

pub mod dof;
pub mod element;
pub mod mesh;
pub mod ordering;
pub mod recovery;
pub mod sparse;

pub use dof::{DofMap, DofMapBuilder, Slot};
pub use element::{Quadrature, QuadPoint};
pub use mesh::{build_sent_mesh, BandInfo, BoundarySets, Mesh, MeshStats, SentGeometry, SentMeshSpec};
pub use recovery::{nodal_gradient_at_points, recover_nodal};
pub use sparse::{solve_linear, Profile, SkylineMatrix, SparseSystem};
