//! Global interpolants, the NIPG energy norm and convergence rates.
//!
//! ```text
//! |||v|||^2 = eps ||grad v||^2 + ||c0 v||^2 + sum_e rho_e ||[v]||_e^2
//!           + 1/2 sum_K ( ||v+||^2 on inflow sides of K on the boundary
//!                       + ||v+ - v-||^2 on interior inflow sides of K
//!                       + ||v+||^2 on outflow sides of K on the boundary )
//! ```
//!
//! Trace terms carry the weight `|b . n|`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{inflow_outflow_split, DgFunction, DgSpace, ElementTables, Flow};
use crate::error::{Error, Result};
use crate::felib::{gauss_legendre, L2Projector, VeeInterpolator};
use crate::mesh::{RegionTag, Side};
use crate::problem::Problem;

/// Squared contributions to the energy norm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NormComponents {
    /// `eps ||grad v||^2`
    pub diffusion: f64,
    /// `||c0 v||^2`
    pub reaction: f64,
    /// `sum_e rho_e ||[v]||_e^2`
    pub penalty: f64,
    pub inflow_boundary: f64,
    pub inflow_jump: f64,
    pub outflow_boundary: f64,
}

impl NormComponents {
    pub fn total_squared(&self) -> f64 {
        self.diffusion
            + self.reaction
            + self.penalty
            + self.inflow_boundary
            + self.inflow_jump
            + self.outflow_boundary
    }

    pub fn norm(&self) -> f64 {
        self.total_squared().sqrt()
    }

    fn add(&mut self, o: &NormComponents) {
        self.diffusion += o.diffusion;
        self.reaction += o.reaction;
        self.penalty += o.penalty;
        self.inflow_boundary += o.inflow_boundary;
        self.inflow_jump += o.inflow_jump;
        self.outflow_boundary += o.outflow_boundary;
    }
}

/// Errors of one discrete solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub n: usize,
    pub eps: f64,
    pub k: usize,
    /// `|||I_N u - u_h|||`
    pub e_in: f64,
    /// `|||Pi u - u_h|||`
    pub e_pi: f64,
    /// `||u - u_h||_{L2}`
    pub e_l2: f64,
    /// Breakdown of `e_in^2`.
    pub components: NormComponents,
}

/// Default points per direction for moments in the interpolants.
pub fn moment_quad_points(k: usize) -> usize {
    k + 2
}

/// Default points per direction for error integrals.
pub fn error_quad_points(k: usize) -> usize {
    k + 3
}

/// Vertices-edges-element interpolant `I_N u`, with `k + 2` point moments.
pub fn interpolate_vee_global(
    u: &(dyn Fn(f64, f64) -> f64 + Sync),
    space: &DgSpace,
) -> Result<DgFunction> {
    interpolate_vee_global_with(u, space, moment_quad_points(space.degree()))
}

pub fn interpolate_vee_global_with(
    u: &(dyn Fn(f64, f64) -> f64 + Sync),
    space: &DgSpace,
    quad_points: usize,
) -> Result<DgFunction> {
    let interp = VeeInterpolator::new(&space.basis, &gauss_legendre(quad_points)?)?;
    let locals: Vec<Vec<f64>> = (0..space.mesh.num_elements())
        .into_par_iter()
        .map(|elem| {
            let cell = space.mesh.cell(elem);
            interp.interpolate(|xi, eta| {
                let (x, y) = cell.map(xi, eta);
                u(x, y)
            })
        })
        .collect();
    DgFunction::from_coeffs(space.dofmap, locals.concat())
}

/// Element-wise `L2` projection `P_h u`.
pub fn project_l2_global(
    u: &(dyn Fn(f64, f64) -> f64 + Sync),
    space: &DgSpace,
    quad_points: usize,
) -> Result<DgFunction> {
    let proj = L2Projector::new(&space.basis, &gauss_legendre(quad_points)?)?;
    let locals: Vec<Vec<f64>> = (0..space.mesh.num_elements())
        .into_par_iter()
        .map(|elem| proj.project_on_cell(&space.mesh.cell(elem), u))
        .collect();
    DgFunction::from_coeffs(space.dofmap, locals.concat())
}

/// Composite interpolant: `P_h u` on the coarse region, `I_N u` elsewhere.
pub fn interpolate_composite(
    u: &(dyn Fn(f64, f64) -> f64 + Sync),
    space: &DgSpace,
) -> Result<DgFunction> {
    let q = moment_quad_points(space.degree());
    let vee = interpolate_vee_global_with(u, space, q)?;
    let l2 = project_l2_global(u, space, q)?;
    let mut out = vee;
    for elem in 0..space.mesh.num_elements() {
        if space.mesh.region_of_index(elem) == RegionTag::Omega11 {
            out.local_mut(elem).copy_from_slice(l2.local(elem));
        }
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn grad(coeffs: &[f64], grads: &[[f64; 2]], hx: f64, hy: f64) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (c, d) in coeffs.iter().zip(grads) {
        g[0] += c * d[0];
        g[1] += c * d[1];
    }
    [2.0 * g[0] / hx, 2.0 * g[1] / hy]
}

/// Energy norm with `k + 3` point Gauss rules.
pub fn energy_norm(v: &DgFunction, space: &DgSpace, problem: &dyn Problem) -> Result<NormComponents> {
    energy_norm_with(v, space, problem, error_quad_points(space.degree()))
}

/// Energy norm components of `v`, integrated with `quad_points` Gauss points
/// per direction. Element and edge sums are reduced in index order.
pub fn energy_norm_with(
    v: &DgFunction,
    space: &DgSpace,
    problem: &dyn Problem,
    quad_points: usize,
) -> Result<NormComponents> {
    if v.dofmap != space.dofmap {
        return Err(Error::SizeMismatch("function and space use different DOF maps".into()));
    }
    let tables = ElementTables::new(&space.basis, gauss_legendre(quad_points)?);
    let eps = problem.eps();

    let per_element: Vec<Result<NormComponents>> = (0..space.mesh.num_elements())
        .into_par_iter()
        .map(|elem| element_terms(v, space, problem, &tables, eps, elem))
        .collect();
    let mut total = NormComponents::default();
    for c in per_element {
        total.add(&c?);
    }

    let penalties: Vec<f64> = space
        .edges
        .par_iter()
        .map(|edge| {
            let plus = v.local(edge.plus);
            let pv = tables.side_vals(edge.plus_side);
            let half_len = 0.5 * edge.length;
            tables
                .rule
                .weights
                .iter()
                .enumerate()
                .map(|(qi, &w)| {
                    let mut jump = dot(plus, &pv[qi]);
                    if let Some((m, s)) = edge.minus {
                        jump -= dot(v.local(m), &tables.side_vals(s)[qi]);
                    }
                    w * half_len * edge.rho * jump * jump
                })
                .sum()
        })
        .collect();
    total.penalty = penalties.iter().sum();
    Ok(total)
}

fn element_terms(
    v: &DgFunction,
    space: &DgSpace,
    problem: &dyn Problem,
    tables: &ElementTables,
    eps: f64,
    elem: usize,
) -> Result<NormComponents> {
    let cell = space.mesh.cell(elem);
    let (hx, hy) = (cell.hx(), cell.hy());
    let jac = 0.25 * hx * hy;
    let coeffs = v.local(elem);
    let mut out = NormComponents::default();
    for (p, &(xi, eta, w)) in tables.points.iter().enumerate() {
        let (x, y) = cell.map(xi, eta);
        let c0sq = problem.c0_squared(x, y);
        if c0sq < 0.0 {
            return Err(Error::CoefficientCondition(format!(
                "c - div(b)/2 = {c0sq} < 0 at ({x}, {y})"
            )));
        }
        let val = dot(coeffs, &tables.vol_vals[p]);
        let g = grad(coeffs, &tables.vol_grads[p], hx, hy);
        out.diffusion += w * jac * eps * (g[0] * g[0] + g[1] * g[1]);
        out.reaction += w * jac * c0sq * val * val;
    }
    let split = inflow_outflow_split(space, elem, problem, &tables.rule.nodes)?;
    for side in Side::ALL {
        let neighbor = space.neighbor(elem, side);
        let flow = split.flow(side);
        if flow == Flow::Outflow && neighbor.is_some() {
            continue;
        }
        let n = side.outward_normal();
        let half_len = 0.5 * if n[0] != 0.0 { hy } else { hx };
        let own = tables.side_vals(side);
        let across = tables.side_vals(side.opposite());
        let mut acc = 0.0;
        for (qi, (&t, &w)) in tables.rule.nodes.iter().zip(&tables.rule.weights).enumerate() {
            let (sx, sy) = side.reference_point(t);
            let (x, y) = cell.map(sx, sy);
            let b = problem.convection(x, y);
            let bn = (b[0] * n[0] + b[1] * n[1]).abs();
            let mut d = dot(coeffs, &own[qi]);
            if let Some(nb) = neighbor {
                d -= dot(v.local(nb), &across[qi]);
            }
            acc += w * half_len * bn * d * d;
        }
        let acc = 0.5 * acc;
        match (flow, neighbor) {
            (Flow::Inflow, None) => out.inflow_boundary += acc,
            (Flow::Inflow, Some(_)) => out.inflow_jump += acc,
            (Flow::Outflow, _) => out.outflow_boundary += acc,
        }
    }
    Ok(out)
}

/// `||u - v||_{L2}` with `quad_points` Gauss points per direction.
pub fn l2_error(
    u: &(dyn Fn(f64, f64) -> f64 + Sync),
    v: &DgFunction,
    space: &DgSpace,
    quad_points: usize,
) -> Result<f64> {
    let rule = gauss_legendre(quad_points)?;
    let points: Vec<_> = rule.points_2d().collect();
    let vals: Vec<Vec<f64>> = points.iter().map(|&(x, y, _)| space.basis.eval(x, y)).collect();
    let per_element: Vec<f64> = (0..space.mesh.num_elements())
        .into_par_iter()
        .map(|elem| {
            let cell = space.mesh.cell(elem);
            let jac = 0.25 * cell.area();
            let coeffs = v.local(elem);
            points
                .iter()
                .zip(&vals)
                .map(|(&(xi, eta, w), phi)| {
                    let (x, y) = cell.map(xi, eta);
                    let d = u(x, y) - dot(coeffs, phi);
                    w * jac * d * d
                })
                .sum()
        })
        .collect();
    Ok(per_element.iter().sum::<f64>().sqrt())
}

/// Largest absolute jump of `v` across interior edges, sampled at `samples`
/// edge parameters in `[-1, 1]`.
pub fn max_interior_jump(v: &DgFunction, space: &DgSpace, samples: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for edge in space.edges.iter().filter(|e| !e.is_boundary()) {
        let (m, ms) = edge.minus.expect("interior edge");
        for &t in samples {
            let (a, b) = edge.plus_side.reference_point(t);
            let (c, d) = ms.reference_point(t);
            let jump = v.eval_local(&space.basis, edge.plus, a, b) - v.eval_local(&space.basis, m, c, d);
            worst = worst.max(jump.abs());
        }
    }
    worst
}

/// `e_IN`, `e_Pi` and `e_L2` of `u_h` for a problem with known solution.
pub fn supercloseness_error(space: &DgSpace, problem: &dyn Problem, u_h: &DgFunction) -> Result<ErrorRecord> {
    let exact = problem
        .exact()
        .ok_or_else(|| Error::Config("problem has no exact solution".into()))?;
    let u = |x: f64, y: f64| exact.value(x, y);
    let k = space.degree();

    let mut diff = interpolate_vee_global(&u, space)?;
    diff.axpy(-1.0, u_h);
    let components = energy_norm(&diff, space, problem)?;

    let mut diff_pi = interpolate_composite(&u, space)?;
    diff_pi.axpy(-1.0, u_h);
    let e_pi = energy_norm(&diff_pi, space, problem)?.norm();

    let e_l2 = l2_error(&u, u_h, space, error_quad_points(k))?;
    Ok(ErrorRecord {
        n: space.mesh.n(),
        eps: problem.eps(),
        k,
        e_in: components.norm(),
        e_pi,
        e_l2,
        components,
    })
}

/// `p_N = ln(e_N / e_2N) / ln 2` for each `N` whose double is present;
/// `None` otherwise. Output follows the input order.
pub fn convergence_rates(errors: &[(usize, f64)]) -> Result<Vec<(usize, Option<f64>)>> {
    if let Some(&(n, e)) = errors.iter().find(|&&(_, e)| !(e > 0.0 && e.is_finite())) {
        return Err(Error::RateInput(format!("error {e} at N = {n} is not positive")));
    }
    Ok(errors
        .iter()
        .map(|&(n, e)| {
            let p = errors
                .iter()
                .find(|&&(m, _)| m == 2 * n)
                .map(|&(_, e2)| (e / e2).ln() / std::f64::consts::LN_2);
            (n, p)
        })
        .collect())
}
