//! Broken `Q_k` space on a Shishkin mesh and assembly of the NIPG system
//!
//! ```text
//! B(u, v) = sum_K  eps (grad u, grad v)_K + (b . grad u, v)_K + (c u, v)_K
//!         - eps sum_e <grad u . nu>[v] + eps sum_e [u]<grad v . nu> + sum_e rho_e [u][v]
//!         - sum_K  (b . n u+, v+)_{inflow part of dK on the boundary}
//!         - sum_K  (b . n (u+ - u-), v+)_{interior inflow part of dK}
//! L(v)    = sum_K (f, v)_K
//! ```
//!
//! Rows are test functions, columns trial functions. On boundary edges
//! `[v] = <v> = v`, which imposes the homogeneous Dirichlet condition weakly.

use std::fmt;

use crate::error::{Error, Result};
use crate::felib::{gauss_legendre, QuadratureRule, ReferenceBasis};
use crate::mesh::{
    classify_edges_with, edge_of_side, Edge, ElementNumbering, ShishkinMesh, Side,
};
use crate::problem::Problem;
use crate::sparse::{CsrMatrix, TripletBuffer};

/// Element-blocked DOF layout: element `e` owns `[e (k+1)^2, (e+1) (k+1)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    pub k: usize,
    pub n: usize,
}

impl DofMap {
    pub fn new(k: usize, n: usize) -> Self {
        Self { k, n }
    }

    pub fn local_dim(&self) -> usize {
        (self.k + 1) * (self.k + 1)
    }

    pub fn num_elements(&self) -> usize {
        self.n * self.n
    }

    pub fn total_dofs(&self) -> usize {
        self.num_elements() * self.local_dim()
    }

    pub fn offset(&self, elem: usize) -> usize {
        elem * self.local_dim()
    }

    pub fn range(&self, elem: usize) -> std::ops::Range<usize> {
        let o = self.offset(elem);
        o..o + self.local_dim()
    }
}

/// Mesh, classified edges, DOF map and reference basis of one discretization.
#[derive(Debug, Clone)]
pub struct DgSpace {
    pub mesh: ShishkinMesh,
    pub edges: Vec<Edge>,
    pub dofmap: DofMap,
    pub basis: ReferenceBasis,
    pub numbering: ElementNumbering,
}

impl DgSpace {
    pub fn new(mesh: ShishkinMesh, k: usize) -> Result<Self> {
        Self::with_numbering(mesh, k, ElementNumbering::ColumnMajor)
    }

    pub fn with_numbering(mesh: ShishkinMesh, k: usize, numbering: ElementNumbering) -> Result<Self> {
        let basis = ReferenceBasis::new(k)?;
        let edges = classify_edges_with(&mesh, numbering);
        let dofmap = DofMap::new(k, mesh.n());
        Ok(Self {
            mesh,
            edges,
            dofmap,
            basis,
            numbering,
        })
    }

    pub fn degree(&self) -> usize {
        self.dofmap.k
    }

    pub fn edge_on(&self, elem: usize, side: Side) -> &Edge {
        &self.edges[edge_of_side(self.mesh.n(), elem, side)]
    }

    /// Element across `side` of `elem`, `None` on the boundary.
    pub fn neighbor(&self, elem: usize, side: Side) -> Option<usize> {
        let e = self.edge_on(elem, side);
        match e.minus {
            None => None,
            Some((m, _)) if e.plus == elem => Some(m),
            Some(_) => Some(e.plus),
        }
    }
}

/// Coefficient vector of a function in the broken space.
#[derive(Debug, Clone, PartialEq)]
pub struct DgFunction {
    pub dofmap: DofMap,
    pub coeffs: Vec<f64>,
}

impl DgFunction {
    pub fn zeros(dofmap: DofMap) -> Self {
        Self {
            dofmap,
            coeffs: vec![0.0; dofmap.total_dofs()],
        }
    }

    pub fn from_coeffs(dofmap: DofMap, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != dofmap.total_dofs() {
            return Err(Error::SizeMismatch(format!(
                "{} coefficients for {} DOFs",
                coeffs.len(),
                dofmap.total_dofs()
            )));
        }
        Ok(Self { dofmap, coeffs })
    }

    pub fn local(&self, elem: usize) -> &[f64] {
        &self.coeffs[self.dofmap.range(elem)]
    }

    pub fn local_mut(&mut self, elem: usize) -> &mut [f64] {
        let r = self.dofmap.range(elem);
        &mut self.coeffs[r]
    }

    /// Value of the restriction to `elem` at reference point `(xi, eta)`.
    pub fn eval_local(&self, basis: &ReferenceBasis, elem: usize, xi: f64, eta: f64) -> f64 {
        basis.eval_expansion(self.local(elem), xi, eta)
    }

    /// Physical gradient of the restriction to `elem`.
    pub fn grad_local(&self, space: &DgSpace, elem: usize, xi: f64, eta: f64) -> [f64; 2] {
        let cell = space.mesh.cell(elem);
        let g = space.basis.eval_grad(xi, eta);
        let c = self.local(elem);
        let (gx, gy) = g
            .iter()
            .zip(c)
            .fold((0.0, 0.0), |(ax, ay), (g, c)| (ax + c * g[0], ay + c * g[1]));
        [2.0 * gx / cell.hx(), 2.0 * gy / cell.hy()]
    }

    /// Value at a physical point (see [`ShishkinMesh::locate`] for points on
    /// mesh lines).
    pub fn eval(&self, space: &DgSpace, x: f64, y: f64) -> Option<f64> {
        let elem = space.mesh.locate(x, y)?;
        let (xi, eta) = space.mesh.cell(elem).to_reference(x, y);
        Some(self.eval_local(&space.basis, elem, xi, eta))
    }

    pub fn axpy(&mut self, alpha: f64, other: &DgFunction) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += alpha * b;
        }
    }
}

/// Traces of a function on an edge from its two sides.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePair {
    pub plus: Vec<f64>,
    /// `None` on the boundary.
    pub minus: Option<Vec<f64>>,
}

impl TracePair {
    /// `[v] = v+ - v-`, or `v` on the boundary.
    pub fn jump(&self) -> Vec<f64> {
        match &self.minus {
            Some(m) => self.plus.iter().zip(m).map(|(p, m)| p - m).collect(),
            None => self.plus.clone(),
        }
    }

    /// `<v> = (v+ + v-) / 2`, or `v` on the boundary.
    pub fn mean(&self) -> Vec<f64> {
        match &self.minus {
            Some(m) => self.plus.iter().zip(m).map(|(p, m)| 0.5 * (p + m)).collect(),
            None => self.plus.clone(),
        }
    }
}

/// Traces of `v` at edge parameters `ts` in `[-1, 1]`.
pub fn trace_pair(v: &DgFunction, space: &DgSpace, edge: &Edge, ts: &[f64]) -> TracePair {
    let side_values = |elem: usize, side: Side| -> Vec<f64> {
        ts.iter()
            .map(|&t| {
                let (xi, eta) = side.reference_point(t);
                v.eval_local(&space.basis, elem, xi, eta)
            })
            .collect()
    };
    TracePair {
        plus: side_values(edge.plus, edge.plus_side),
        minus: edge.minus.map(|(m, s)| side_values(m, s)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    /// `b . n < 0` on the whole side.
    Inflow,
    /// `b . n >= 0` on the whole side.
    Outflow,
}

/// Inflow/outflow classification of the four sides of one element, indexed
/// in [`Side::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowSplit {
    pub sides: [Flow; 4],
}

impl FlowSplit {
    pub fn flow(&self, side: Side) -> Flow {
        self.sides[side_slot(side)]
    }

    pub fn inflow_sides(&self) -> impl Iterator<Item = Side> + '_ {
        Side::ALL
            .into_iter()
            .filter(|&s| self.flow(s) == Flow::Inflow)
    }
}

fn side_slot(side: Side) -> usize {
    match side {
        Side::Left => 0,
        Side::Right => 1,
        Side::Bottom => 2,
        Side::Top => 3,
    }
}

/// Classifies each side of `elem` by the sign of `b . n` sampled at the
/// side endpoints and at edge parameters `samples`. A side on which the
/// sign changes is rejected.
pub fn inflow_outflow_split(
    space: &DgSpace,
    elem: usize,
    problem: &dyn Problem,
    samples: &[f64],
) -> Result<FlowSplit> {
    let cell = space.mesh.cell(elem);
    let mut sides = [Flow::Outflow; 4];
    for side in Side::ALL {
        let n = side.outward_normal();
        let mut neg = 0usize;
        let mut total = 0usize;
        for &t in samples.iter().chain(&[-1.0, 1.0]) {
            let (xi, eta) = side.reference_point(t);
            let (x, y) = cell.map(xi, eta);
            let b = problem.convection(x, y);
            if b[0] * n[0] + b[1] * n[1] < 0.0 {
                neg += 1;
            }
            total += 1;
        }
        sides[side_slot(side)] = match neg {
            0 => Flow::Outflow,
            m if m == total => Flow::Inflow,
            _ => {
                return Err(Error::CoefficientCondition(format!(
                    "b . n changes sign on side {side:?} of element {elem}"
                )))
            }
        };
    }
    Ok(FlowSplit { sides })
}

/// How the homogeneous Dirichlet condition enters the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryTreatment {
    /// Through the boundary-edge terms of the bilinear form.
    #[default]
    Weak,
    /// Boundary nodal values fixed to zero (rows replaced by identity).
    Strong,
}

impl fmt::Display for BoundaryTreatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryTreatment::Weak => "weak",
            BoundaryTreatment::Strong => "strong",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AssemblyOptions {
    /// Gauss points per direction; `None` means `k + 2`.
    pub quad_points: Option<usize>,
    pub boundary: BoundaryTreatment,
}

impl AssemblyOptions {
    pub fn resolved_quad_points(&self, k: usize) -> usize {
        self.quad_points.unwrap_or(k + 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemMeta {
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub sigma: f64,
    pub quad_points: usize,
    pub boundary: BoundaryTreatment,
}

#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub meta: SystemMeta,
}

/// Basis values and reference gradients at the volume points of a rule and
/// at the rule's nodes on each of the four sides.
#[derive(Debug, Clone)]
pub(crate) struct ElementTables {
    pub rule: QuadratureRule,
    /// `(xi, eta, weight)` per volume point.
    pub points: Vec<(f64, f64, f64)>,
    pub vol_vals: Vec<Vec<f64>>,
    pub vol_grads: Vec<Vec<[f64; 2]>>,
    /// Per side (in [`Side::ALL`] order), per edge node.
    pub side_vals: [Vec<Vec<f64>>; 4],
    pub side_grads: [Vec<Vec<[f64; 2]>>; 4],
}

impl ElementTables {
    pub fn new(basis: &ReferenceBasis, rule: QuadratureRule) -> Self {
        let points: Vec<_> = rule.points_2d().collect();
        let vol_vals = points.iter().map(|&(x, y, _)| basis.eval(x, y)).collect();
        let vol_grads = points.iter().map(|&(x, y, _)| basis.eval_grad(x, y)).collect();
        let side_table = |f: &dyn Fn(f64, f64) -> Vec<f64>, side: Side| {
            rule.nodes
                .iter()
                .map(|&t| {
                    let (x, y) = side.reference_point(t);
                    f(x, y)
                })
                .collect::<Vec<_>>()
        };
        let side_vals = Side::ALL.map(|s| side_table(&|x, y| basis.eval(x, y), s));
        let side_grads = Side::ALL.map(|s| {
            rule.nodes
                .iter()
                .map(|&t| {
                    let (x, y) = s.reference_point(t);
                    basis.eval_grad(x, y)
                })
                .collect::<Vec<_>>()
        });
        Self {
            rule,
            points,
            vol_vals,
            vol_grads,
            side_vals,
            side_grads,
        }
    }

    pub fn side_vals(&self, side: Side) -> &[Vec<f64>] {
        &self.side_vals[side_slot(side)]
    }

    pub fn side_grads(&self, side: Side) -> &[Vec<[f64; 2]>] {
        &self.side_grads[side_slot(side)]
    }
}

/// Physical normal derivative from a reference gradient on a cell of size
/// `hx x hy`.
#[inline]
fn normal_derivative(g: [f64; 2], hx: f64, hy: f64, nu: [f64; 2]) -> f64 {
    2.0 * g[0] / hx * nu[0] + 2.0 * g[1] / hy * nu[1]
}

// (element, jump sign, basis traces, normal derivatives) per side of an edge
type SideTrace<'a> = (usize, f64, &'a [Vec<f64>], Vec<Vec<f64>>);

/// Assembles the NIPG matrix and load vector.
pub fn assemble(space: &DgSpace, problem: &dyn Problem, opts: &AssemblyOptions) -> Result<SparseSystem> {
    let k = space.degree();
    let q = opts.resolved_quad_points(k);
    if q < k + 1 {
        return Err(Error::QuadratureTooCoarse { got: q, min: k + 1 });
    }
    if space.edges.len() != 2 * space.mesh.n() * (space.mesh.n() + 1)
        || space.dofmap.n != space.mesh.n()
    {
        return Err(Error::SizeMismatch(
            "mesh, edges and DOF map describe different grids".into(),
        ));
    }
    let tables = ElementTables::new(&space.basis, gauss_legendre(q)?);
    let dim = space.dofmap.local_dim();
    let ndofs = space.dofmap.total_dofs();
    let eps = problem.eps();
    let ne = space.mesh.num_elements();

    let mut triplets = TripletBuffer::with_capacity(ndofs, ndofs, ne * dim * dim * 5);
    let mut rhs = vec![0.0; ndofs];
    let mut local = vec![0.0; dim * dim];

    // volume terms
    for elem in 0..ne {
        let cell = space.mesh.cell(elem);
        let (hx, hy) = (cell.hx(), cell.hy());
        let jac = 0.25 * hx * hy;
        local.iter_mut().for_each(|v| *v = 0.0);
        let off = space.dofmap.offset(elem);
        for (p, &(xi, eta, w)) in tables.points.iter().enumerate() {
            let (x, y) = cell.map(xi, eta);
            let b = problem.convection(x, y);
            let c = problem.reaction(x, y);
            let f = problem.source(x, y);
            let vals = &tables.vol_vals[p];
            let grads = &tables.vol_grads[p];
            let wj = w * jac;
            for i in 0..dim {
                let (gxi, gyi) = (2.0 * grads[i][0] / hx, 2.0 * grads[i][1] / hy);
                rhs[off + i] += wj * f * vals[i];
                for j in 0..dim {
                    let (gxj, gyj) = (2.0 * grads[j][0] / hx, 2.0 * grads[j][1] / hy);
                    local[i * dim + j] += wj
                        * (eps * (gxi * gxj + gyi * gyj)
                            + (b[0] * gxj + b[1] * gyj) * vals[i]
                            + c * vals[j] * vals[i]);
                }
            }
        }
        for i in 0..dim {
            for j in 0..dim {
                triplets.push(off + i, off + j, local[i * dim + j]);
            }
        }
    }

    // interior-penalty face terms
    for edge in &space.edges {
        let mut sides = vec![(edge.plus, edge.plus_side, 1.0)];
        if let Some((m, s)) = edge.minus {
            sides.push((m, s, -1.0));
        }
        let mean = if edge.is_boundary() { 1.0 } else { 0.5 };
        let half_len = 0.5 * edge.length;
        let nu = edge.normal;
        // traces and normal derivatives for each side
        let traces: Vec<SideTrace> = sides
            .iter()
            .map(|&(elem, side, sign)| {
                let cell = space.mesh.cell(elem);
                let dn = tables
                    .side_grads(side)
                    .iter()
                    .map(|gs| {
                        gs.iter()
                            .map(|&g| normal_derivative(g, cell.hx(), cell.hy(), nu))
                            .collect()
                    })
                    .collect();
                (elem, sign, tables.side_vals(side), dn)
            })
            .collect();
        for &(test_elem, s_test, v_test, ref dn_test) in &traces {
            for &(trial_elem, s_trial, v_trial, ref dn_trial) in &traces {
                local.iter_mut().for_each(|v| *v = 0.0);
                for (qi, &w) in tables.rule.weights.iter().enumerate() {
                    let wj = w * half_len;
                    for i in 0..dim {
                        for j in 0..dim {
                            local[i * dim + j] += wj
                                * (-eps * mean * dn_trial[qi][j] * s_test * v_test[qi][i]
                                    + eps * s_trial * v_trial[qi][j] * mean * dn_test[qi][i]
                                    + edge.rho * s_trial * s_test * v_trial[qi][j] * v_test[qi][i]);
                        }
                    }
                }
                let (ro, co) = (space.dofmap.offset(test_elem), space.dofmap.offset(trial_elem));
                for i in 0..dim {
                    for j in 0..dim {
                        triplets.push(ro + i, co + j, local[i * dim + j]);
                    }
                }
            }
        }
    }

    // upwind terms on inflow sides
    for elem in 0..ne {
        let split = inflow_outflow_split(space, elem, problem, &tables.rule.nodes)?;
        let cell = space.mesh.cell(elem);
        let off = space.dofmap.offset(elem);
        for side in split.inflow_sides() {
            let n = side.outward_normal();
            let half_len = 0.5 * if n[0] != 0.0 { cell.hy() } else { cell.hx() };
            let neighbor = space.neighbor(elem, side);
            let vals = tables.side_vals(side);
            let nb_vals = tables.side_vals(side.opposite());
            let mut own = vec![0.0; dim * dim];
            let mut cross = vec![0.0; dim * dim];
            for (qi, (&t, &w)) in tables.rule.nodes.iter().zip(&tables.rule.weights).enumerate() {
                let (xi, eta) = side.reference_point(t);
                let (x, y) = cell.map(xi, eta);
                let b = problem.convection(x, y);
                let bn = w * half_len * (b[0] * n[0] + b[1] * n[1]);
                for i in 0..dim {
                    for j in 0..dim {
                        own[i * dim + j] -= bn * vals[qi][j] * vals[qi][i];
                        cross[i * dim + j] += bn * nb_vals[qi][j] * vals[qi][i];
                    }
                }
            }
            for i in 0..dim {
                for j in 0..dim {
                    triplets.push(off + i, off + j, own[i * dim + j]);
                }
            }
            if let Some(nb) = neighbor {
                let co = space.dofmap.offset(nb);
                for i in 0..dim {
                    for j in 0..dim {
                        triplets.push(off + i, co + j, cross[i * dim + j]);
                    }
                }
            }
        }
    }

    let mut matrix = triplets.into_csr();
    if opts.boundary == BoundaryTreatment::Strong {
        impose_strong(space, &mut matrix, &mut rhs);
    }

    Ok(SparseSystem {
        matrix,
        rhs,
        meta: SystemMeta {
            n: space.mesh.n(),
            k,
            eps,
            sigma: space.mesh.config.sigma,
            quad_points: q,
            boundary: opts.boundary,
        },
    })
}

/// Global indices of nodal DOFs located on the outer boundary.
pub fn boundary_dofs(space: &DgSpace) -> Vec<usize> {
    let n = space.mesh.n();
    let m = space.degree() + 1;
    let mut out = Vec::new();
    for elem in 0..space.mesh.num_elements() {
        let (i, j) = space.mesh.element_ij(elem);
        let off = space.dofmap.offset(elem);
        for b in 0..m {
            for a in 0..m {
                let on = (i == 0 && a == 0)
                    || (i == n - 1 && a == m - 1)
                    || (j == 0 && b == 0)
                    || (j == n - 1 && b == m - 1);
                if on {
                    out.push(off + a + m * b);
                }
            }
        }
    }
    out
}

fn impose_strong(space: &DgSpace, matrix: &mut CsrMatrix, rhs: &mut [f64]) {
    let fixed = boundary_dofs(space);
    let mut is_fixed = vec![false; matrix.nrows];
    for &d in &fixed {
        is_fixed[d] = true;
    }
    for r in 0..matrix.nrows {
        let range = matrix.row_ptr[r]..matrix.row_ptr[r + 1];
        for p in range {
            let c = matrix.col_idx[p];
            if is_fixed[r] {
                matrix.values[p] = if c == r { 1.0 } else { 0.0 };
            } else if is_fixed[c] {
                matrix.values[p] = 0.0;
            }
        }
        if is_fixed[r] {
            rhs[r] = 0.0;
        }
    }
}
