//! Reference-cell machinery on `(-1, 1)^2`.

pub mod basis;
pub mod local;
pub mod quadrature;

pub use basis::{eval_basis, eval_basis_grad, ReferenceBasis, Tabulation1d};
pub use local::{
    l2_projection_local, local_mass_matrix, vee_interpolation_local, L2Projector,
    VeeInterpolator,
};
pub use quadrature::{gauss_legendre, gauss_lobatto_nodes, legendre, QuadratureRule};
