//! Library assembly and energy norm against the brute-force oracle on tiny
//! meshes.

mod common;

use common::Grid;
use nipg::mesh::build_mesh_allow_coarse;
use nipg::{
    assemble, energy_norm, AssemblyOptions, CornerLayerProblem, DgFunction, DgSpace, ElementNumbering, MeshConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn space(n: usize, k: usize, eps: f64, numbering: ElementNumbering) -> DgSpace {
    let mesh = build_mesh_allow_coarse(MeshConfig::new(n, eps, k as f64 + 1.5, 2.0, 3.0)).unwrap();
    DgSpace::with_numbering(mesh, k, numbering).unwrap()
}

fn max_matrix_gap(n: usize, k: usize, eps: f64, numbering: ElementNumbering) -> (f64, f64) {
    let s = space(n, k, eps, numbering);
    let sys = assemble(&s, &CornerLayerProblem::new(eps), &AssemblyOptions::default()).unwrap();
    let g = Grid::new(n, k, eps, k as f64 + 1.5);
    let oracle = common::dense_matrix(&g, eps, numbering == ElementNumbering::Reversed);
    let lib = sys.matrix.to_dense();
    let mut gap: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (r, row) in oracle.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            gap = gap.max((v - lib[r][c]).abs());
            scale = scale.max(v.abs());
        }
    }
    (gap, scale)
}

#[test]
fn mesh_points_agree_with_oracle() {
    for &(n, eps) in &[(2, 1e-3), (8, 1e-4), (16, 1e-7)] {
        let s = space(n, 1, eps, ElementNumbering::ColumnMajor);
        let g = Grid::new(n, 1, eps, 2.5);
        for i in 0..=n {
            assert!((s.mesh.x_pts[i] - g.xs[i]).abs() < 1e-15);
            assert!((s.mesh.y_pts[i] - g.ys[i]).abs() < 1e-15);
        }
    }
}

#[test]
fn matrix_matches_oracle_k1_n2() {
    let (gap, scale) = max_matrix_gap(2, 1, 1e-3, ElementNumbering::ColumnMajor);
    assert!(scale > 1.0);
    assert!(gap < 1e-12, "gap {gap}");
}

#[test]
fn matrix_matches_oracle_higher_degree_and_reversed() {
    for &(n, k, eps, numbering) in &[
        (2, 2, 1e-3, ElementNumbering::ColumnMajor),
        (2, 3, 1e-4, ElementNumbering::ColumnMajor),
        (4, 1, 1e-3, ElementNumbering::Reversed),
        (4, 2, 1e-2, ElementNumbering::ColumnMajor),
    ] {
        let (gap, scale) = max_matrix_gap(n, k, eps, numbering);
        assert!(gap < 1e-11 * scale.max(1.0), "n={n} k={k}: gap {gap}");
    }
}

#[test]
fn norm_components_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for &(n, k, eps) in &[(2, 1, 1e-3), (2, 2, 1e-4), (4, 1, 1e-2)] {
        let s = space(n, k, eps, ElementNumbering::ColumnMajor);
        let g = Grid::new(n, k, eps, k as f64 + 1.5);
        let coeffs: Vec<f64> = (0..g.dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v = DgFunction::from_coeffs(s.dofmap, coeffs.clone()).unwrap();
        let lib = energy_norm(&v, &s, &CornerLayerProblem::new(eps)).unwrap();
        let want = common::norm_components(&g, eps, &coeffs);
        let got = [
            lib.diffusion,
            lib.reaction,
            lib.penalty,
            lib.inflow_boundary,
            lib.inflow_jump,
            lib.outflow_boundary,
        ];
        for (a, b) in got.iter().zip(want.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "n={n} k={k}: {a} vs {b}");
        }
    }
}

#[test]
fn oracle_quadrature_is_exact_for_high_degree() {
    let (x, w) = common::gauss(8);
    for p in 0..16 {
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
        let want = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
        assert!((got - want).abs() < 1e-14);
    }
}
