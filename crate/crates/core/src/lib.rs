//! Nonsymmetric interior penalty (NIPG) discontinuous Galerkin method on
//! layer-adapted Shishkin meshes for
//!
//! ```text
//! -eps Lap u + b . grad u + c u = f  in (0, 1)^2,   u = 0 on the boundary,
//! ```
//!
//! with `0 < eps << 1`, together with the tools to measure the distance
//! between the discrete solution and interpolants of the exact solution in
//! the NIPG energy norm.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod felib;
pub mod mesh;
pub mod problem;
pub mod solver;
pub mod sparse;
pub mod study;

pub use analysis::{
    energy_norm, interpolate_composite, interpolate_vee_global, supercloseness_error, ErrorRecord,
    NormComponents,
};
pub use assembly::{
    assemble, AssemblyOptions, BoundaryTreatment, DgFunction, DgSpace, DofMap, SparseSystem,
};
pub use error::{Error, Result};
pub use mesh::{
    build_mesh, classify_edges, Edge, EdgeType, ElementNumbering, MeshConfig, RegionTag,
    ShishkinMesh, Side,
};
pub use problem::{CornerLayerProblem, ExactSolution, ManufacturedProblem, Problem};
pub use solver::{solve, SolveReport, SolverConfig, SolverMethod};
pub use sparse::CsrMatrix;
pub use study::{run_study, StudyConfig, StudyReport, StudyRow};
