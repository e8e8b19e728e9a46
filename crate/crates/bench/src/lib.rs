//! Fixtures shared by the benchmarks.

use nipg::assembly::{assemble, AssemblyOptions, SparseSystem};
use nipg::{build_mesh, CornerLayerProblem, DgSpace, MeshConfig};

/// Discrete space and problem for the corner-layer test case.
pub fn setup(k: usize, n: usize, eps: f64) -> (DgSpace, CornerLayerProblem) {
    let mesh = build_mesh(MeshConfig::new(n, eps, k as f64 + 1.5, 2.0, 3.0)).expect("valid mesh");
    (DgSpace::new(mesh, k).expect("valid degree"), CornerLayerProblem::new(eps))
}

pub fn system(k: usize, n: usize, eps: f64) -> (DgSpace, CornerLayerProblem, SparseSystem) {
    let (space, problem) = setup(k, n, eps);
    let sys = assemble(&space, &problem, &AssemblyOptions::default()).expect("assembly");
    (space, problem, sys)
}
