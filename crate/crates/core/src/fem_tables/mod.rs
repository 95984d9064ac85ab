//! Quadrature rules, scaled-monomial bases on cells and faces, and the L²
//! projections built on them.

mod basis;
mod quadrature;

pub(crate) use basis::project_on_face;
pub use basis::{project_cell, project_face, CellBasis, FaceBasis, MAX_CELL_DEGREE};
pub use quadrature::{
    edge_rule, gauss_legendre, triangle_rule, EdgeRule, QuadRule, TriangleRule, MAX_EDGE_DEGREE, MAX_TRIANGLE_DEGREE,
};

/// Quadrature degree for user data (load, obstacle, boundary values) when the
/// face degree is `k`.
pub fn data_degree(k: usize) -> usize {
    (2 * (k + 1)).max(4)
}

/// Quadrature degree for the bilinear-form integrals when the face degree is `k`.
pub fn form_degree(k: usize) -> usize {
    2 * (k + 1)
}
