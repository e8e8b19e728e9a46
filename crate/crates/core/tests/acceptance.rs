//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line with
//! the measured quantities, then asserts.
//!
//! Run with `cargo test -p nipg-core --test acceptance -- --nocapture`.

mod common;

use common::Grid;
use nipg::analysis::{max_interior_jump, project_l2_global};
use nipg::felib::gauss_legendre;
use nipg::mesh::build_mesh_allow_coarse;
use nipg::study::{run_study, StudyConfig};
use nipg::{
    assemble, build_mesh, energy_norm, interpolate_vee_global, solve, supercloseness_error, AssemblyOptions,
    CornerLayerProblem, DgFunction, DgSpace, ElementNumbering, ExactSolution, MeshConfig, SolverConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: usize, pass: bool, detail: &str) {
    println!("criterion {id}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn space(n: usize, k: usize, eps: f64, numbering: ElementNumbering) -> DgSpace {
    let mesh = build_mesh(MeshConfig::new(n, eps, k as f64 + 1.5, 2.0, 3.0)).unwrap();
    DgSpace::with_numbering(mesh, k, numbering).unwrap()
}

/// Runs the chain `ns` for one `(k, eps)` and returns `(N, e_IN, p_IN)`.
fn chain(k: usize, eps: f64, ns: &[usize]) -> Vec<(usize, f64, Option<f64>)> {
    let cfg = StudyConfig {
        k_list: vec![k],
        eps_list: vec![eps],
        n_list: Some(ns.to_vec()),
        timing: false,
        ..StudyConfig::default()
    };
    let report = run_study(&cfg).unwrap();
    assert!(!report.any_degraded(), "degraded solve in k={k} eps={eps}");
    report.rows.iter().map(|r| (r.n, r.e_in, r.p_in)).collect()
}

/// Reference errors and rates for one `(k, eps)` chain with tolerances.
struct Table<'a> {
    k: usize,
    eps: f64,
    ns: &'a [usize],
    e_ref: &'a [f64],
    p_ref: &'a [f64],
    e_tol: f64,
    p_tol: f64,
}

fn table_check(id: usize, t: Table) {
    let Table { k, eps, ns, e_ref, p_ref, e_tol, p_tol } = t;
    let rows = chain(k, eps, ns);
    let mut pass = true;
    let mut detail = format!("k={k} eps={eps:e}:");
    for (i, (&e_want, &p_want)) in e_ref.iter().zip(p_ref).enumerate() {
        let (n, e, p) = rows[i];
        let p = p.unwrap();
        let e_ok = ((e - e_want) / e_want).abs() <= e_tol;
        let p_ok = (p - p_want).abs() <= p_tol;
        pass &= e_ok && p_ok;
        detail.push_str(&format!(
            " [N={n} e={e:.4e} (ref {e_want}, ratio {:.3}) p={p:.3} (ref {p_want})]",
            e_want / e
        ));
    }
    report(id, pass, &detail);
    assert!(pass, "criterion {id} outside tolerance");
}

#[test]
fn criterion_1_degree_one_table() {
    table_check(
        1,
        Table {
            k: 1,
            eps: 1e-5,
            ns: &[8, 16, 32, 64, 128, 256],
            e_ref: &[0.219, 0.0997, 0.0396, 0.0143, 0.00486],
            p_ref: &[1.13, 1.33, 1.47, 1.56, 1.62],
            e_tol: 0.02,
            p_tol: 0.03,
        },
    );
}

#[test]
fn criterion_2_degree_two_table() {
    table_check(
        2,
        Table {
            k: 2,
            eps: 1e-6,
            ns: &[8, 16, 32, 64, 128],
            e_ref: &[0.0745, 0.0265, 0.00730, 0.00168],
            p_ref: &[1.49, 1.86, 2.12, 2.28],
            e_tol: 0.03,
            p_tol: 0.05,
        },
    );
}

#[test]
fn criterion_3_degree_three_table() {
    table_check(
        3,
        Table {
            k: 3,
            eps: 1e-5,
            ns: &[8, 16, 32, 64],
            e_ref: &[0.0197, 0.00479, 0.000894],
            p_ref: &[2.04, 2.42, 2.58],
            e_tol: 0.05,
            p_tol: 0.06,
        },
    );
}

#[test]
fn criterion_4_eps_robustness() {
    let errors: Vec<f64> = (4..=9)
        .map(|p| chain(1, 10f64.powi(-p), &[32])[0].1)
        .collect();
    let max = errors.iter().cloned().fold(f64::MIN, f64::max);
    let min = errors.iter().cloned().fold(f64::MAX, f64::min);
    let spread = (max - min) / min;
    let pass = spread < 0.01;
    report(4, pass, &format!("k=1 N=32 e_IN over eps=1e-4..1e-9: {errors:.5?} spread {spread:.3e}"));
    assert!(pass);
}

#[test]
fn criterion_5_coercivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    for k in 1..=3 {
        for eps in [1e-3, 1e-6] {
            let s = space(8, k, eps, ElementNumbering::ColumnMajor);
            let problem = CornerLayerProblem::new(eps);
            let sys = assemble(&s, &problem, &AssemblyOptions::default()).unwrap();
            for _ in 0..100 {
                let scale = 10f64.powf(rng.random_range(-3.0..3.0));
                let coeffs: Vec<f64> = (0..s.dofmap.total_dofs())
                    .map(|_| scale * rng.random_range(-1.0..1.0))
                    .collect();
                let quad = sys.matrix.bilinear(&coeffs, &coeffs);
                let v = DgFunction::from_coeffs(s.dofmap, coeffs).unwrap();
                let norm2 = energy_norm(&v, &s, &problem).unwrap().total_squared();
                // B(v, v) equals the squared norm identically; allow roundoff only
                let slack = (quad - norm2) / norm2;
                worst = worst.min(slack);
                if slack < -1e-12 {
                    failures += 1;
                }
                checked += 1;
            }
        }
    }
    let pass = failures == 0;
    report(
        5,
        pass,
        &format!("{checked} samples, {failures} failures, smallest relative slack {worst:.3e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_6_oracle_equivalence() {
    let (n, k, eps) = (2, 1, 1e-3);
    let mesh = build_mesh_allow_coarse(MeshConfig::new(n, eps, k as f64 + 1.5, 2.0, 3.0)).unwrap();
    let s = DgSpace::new(mesh, k).unwrap();
    let problem = CornerLayerProblem::new(eps);
    let sys = assemble(&s, &problem, &AssemblyOptions::default()).unwrap();
    let g = Grid::new(n, k, eps, k as f64 + 1.5);
    let oracle = common::dense_matrix(&g, eps, false);
    let lib = sys.matrix.to_dense();
    let mut matrix_gap: f64 = 0.0;
    for (r, row) in oracle.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            matrix_gap = matrix_gap.max((v - lib[r][c]).abs());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut norm_gap: f64 = 0.0;
    for _ in 0..10 {
        let coeffs: Vec<f64> = (0..g.dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let want = common::norm_components(&g, eps, &coeffs);
        let v = DgFunction::from_coeffs(s.dofmap, coeffs).unwrap();
        let c = energy_norm(&v, &s, &problem).unwrap();
        let got = [c.diffusion, c.reaction, c.penalty, c.inflow_boundary, c.inflow_jump, c.outflow_boundary];
        for (a, b) in got.iter().zip(want.iter()) {
            if *b != 0.0 {
                norm_gap = norm_gap.max(((a - b) / b).abs());
            } else {
                norm_gap = norm_gap.max(a.abs());
            }
        }
    }
    let pass = matrix_gap <= 1e-12 && norm_gap <= 1e-12;
    report(
        6,
        pass,
        &format!("N=2 k=1: max matrix gap {matrix_gap:.2e}, max relative norm-component gap {norm_gap:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_7_operator_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut reproduction: f64 = 0.0;
    let mut jump: f64 = 0.0;
    let mut orthogonality: f64 = 0.0;
    let mut trivial: f64 = 0.0;
    for k in 1..=3 {
        let eps = 1e-5;
        let s = space(8, k, eps, ElementNumbering::ColumnMajor);

        // random global Q_k polynomial
        let m = k + 1;
        let c: Vec<f64> = (0..m * m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let poly = move |x: f64, y: f64| {
            let mut acc = 0.0;
            for b in 0..m {
                for a in 0..m {
                    acc += c[a + m * b] * x.powi(a as i32) * y.powi(b as i32);
                }
            }
            acc
        };
        let vee = interpolate_vee_global(&poly, &s).unwrap();
        let proj = project_l2_global(&poly, &s, k + 2).unwrap();
        for elem in 0..s.mesh.num_elements() {
            let cell = s.mesh.cell(elem);
            for &(xi, eta) in &[(-1.0, -1.0), (0.3, -0.7), (0.9, 0.2), (1.0, 1.0)] {
                let (x, y) = cell.map(xi, eta);
                let want = poly(x, y);
                reproduction = reproduction.max((vee.eval_local(&s.basis, elem, xi, eta) - want).abs());
                reproduction = reproduction.max((proj.eval_local(&s.basis, elem, xi, eta) - want).abs());
            }
        }

        // continuity of the interpolant of the layer solution
        let problem = CornerLayerProblem::new(eps);
        let u = |x: f64, y: f64| problem.value(x, y);
        let iu = interpolate_vee_global(&u, &s).unwrap();
        jump = jump.max(max_interior_jump(&iu, &s, &[-1.0, -0.5, 0.0, 0.37, 1.0]));

        // L2 orthogonality of the projection residual, scaled by the cell area
        let q = k + 3;
        let pu = project_l2_global(&u, &s, q).unwrap();
        let rule = gauss_legendre(q).unwrap();
        for elem in 0..s.mesh.num_elements() {
            let cell = s.mesh.cell(elem);
            let jac = 0.25 * cell.hx() * cell.hy();
            let mut acc = vec![0.0; s.basis.dim()];
            for (xi, eta, w) in rule.points_2d() {
                let (x, y) = cell.map(xi, eta);
                let r = u(x, y) - pu.eval_local(&s.basis, elem, xi, eta);
                for (a, phi) in acc.iter_mut().zip(s.basis.eval(xi, eta)) {
                    *a += w * jac * r * phi;
                }
            }
            for a in acc {
                orthogonality = orthogonality.max(a.abs() / jac);
            }
        }

        // e_IN vanishes when the discrete solution is the interpolant itself
        let rec = supercloseness_error(&s, &problem, &iu).unwrap();
        trivial = trivial.max(rec.e_in);
    }
    let pass = reproduction <= 1e-12 && jump <= 1e-10 && orthogonality <= 1e-11 && trivial == 0.0;
    report(
        7,
        pass,
        &format!(
            "Q_k reproduction {reproduction:.2e}, interpolant jump {jump:.2e}, orthogonality {orthogonality:.2e}, e_IN(I_N u) {trivial:.1e}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_numbering_invariance() {
    let mut entry_gap: f64 = 0.0;
    let mut error_gap: f64 = 0.0;
    for k in 1..=3 {
        let eps = 1e-5;
        let problem = CornerLayerProblem::new(eps);
        let fwd = space(8, k, eps, ElementNumbering::ColumnMajor);
        let rev = space(8, k, eps, ElementNumbering::Reversed);
        let a = assemble(&fwd, &problem, &AssemblyOptions::default()).unwrap();
        let b = assemble(&rev, &problem, &AssemblyOptions::default()).unwrap();
        let (da, db) = (a.matrix.to_dense(), b.matrix.to_dense());
        for (ra, rb) in da.iter().zip(&db) {
            for (x, y) in ra.iter().zip(rb) {
                entry_gap = entry_gap.max((x - y).abs());
            }
        }
        let mut e = Vec::new();
        for (s, sys) in [(&fwd, &a), (&rev, &b)] {
            let (x, _) = solve(sys, &SolverConfig::default()).unwrap();
            let uh = DgFunction::from_coeffs(s.dofmap, x).unwrap();
            e.push(supercloseness_error(s, &problem, &uh).unwrap().e_in);
        }
        error_gap = error_gap.max(((e[0] - e[1]) / e[0]).abs());
    }
    let pass = entry_gap <= 1e-14 && error_gap <= 1e-12;
    report(
        8,
        pass,
        &format!("N=8 k=1..3: max entry change {entry_gap:.2e}, relative e_IN change {error_gap:.2e}"),
    );
    assert!(pass);
}
