//! Brute-force reference implementation used by the integration tests.
//!
//! Nothing here calls into the library. Meshes, quadrature, basis functions,
//! edge discovery and the bilinear form are rebuilt from scratch with the
//! simplest possible code: every term is integrated pointwise with a
//! generous Gauss rule, and edges are found by matching element sides
//! geometrically.

#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss–Legendre nodes and weights on [-1, 1] from the eigenvalues of the
/// Jacobi matrix.
pub fn gauss(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = i as f64 / ((4 * i * i - 1) as f64).sqrt();
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Lobatto nodes for degrees 1..=3.
pub fn lobatto(k: usize) -> Vec<f64> {
    match k {
        1 => vec![-1.0, 1.0],
        2 => vec![-1.0, 0.0, 1.0],
        3 => {
            let a = 1.0 / 5f64.sqrt();
            vec![-1.0, -a, a, 1.0]
        }
        _ => panic!("oracle supports k <= 3"),
    }
}

/// Value and derivative of the 1D Lagrange polynomial `a` at `t`.
pub fn lagrange(nodes: &[f64], a: usize, t: f64) -> (f64, f64) {
    let mut val = 1.0;
    let mut der = 0.0;
    for (m, &tm) in nodes.iter().enumerate() {
        if m == a {
            continue;
        }
        let d = nodes[a] - tm;
        der = der * (t - tm) / d + val / d;
        val *= (t - tm) / d;
    }
    (val, der)
}

pub fn shishkin_line(n: usize, eps: f64, sigma: f64, beta: f64) -> (Vec<f64>, f64) {
    let lambda = (sigma * eps * (n as f64).ln() / beta).min(0.5);
    let half = n / 2;
    let mut pts = Vec::with_capacity(n + 1);
    for i in 0..=half {
        pts.push((1.0 - lambda) * i as f64 / half as f64);
    }
    for i in 1..=half {
        pts.push(1.0 - lambda + lambda * i as f64 / half as f64);
    }
    pts[half] = 1.0 - lambda;
    pts[n] = 1.0;
    (pts, lambda)
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub n: usize,
    pub k: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub lx: f64,
    pub ly: f64,
    pub nodes: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize, k: usize, eps: f64, sigma: f64) -> Self {
        let (xs, lx) = shishkin_line(n, eps, sigma, 2.0);
        let (ys, ly) = shishkin_line(n, eps, sigma, 3.0);
        Self {
            n,
            k,
            xs,
            ys,
            lx,
            ly,
            nodes: lobatto(k),
        }
    }

    pub fn elements(&self) -> usize {
        self.n * self.n
    }

    pub fn local_dim(&self) -> usize {
        (self.k + 1) * (self.k + 1)
    }

    pub fn dofs(&self) -> usize {
        self.elements() * self.local_dim()
    }

    /// `[x0, x1, y0, y1]` of element `e`.
    pub fn bbox(&self, e: usize) -> [f64; 4] {
        let (i, j) = (e / self.n, e % self.n);
        [self.xs[i], self.xs[i + 1], self.ys[j], self.ys[j + 1]]
    }

    /// Value and physical gradient of local basis function `loc` of element
    /// `e` at `(x, y)`; the point may lie on the closed cell boundary.
    pub fn phi(&self, e: usize, loc: usize, x: f64, y: f64) -> (f64, [f64; 2]) {
        let [x0, x1, y0, y1] = self.bbox(e);
        let (hx, hy) = (x1 - x0, y1 - y0);
        let xi = 2.0 * (x - x0) / hx - 1.0;
        let eta = 2.0 * (y - y0) / hy - 1.0;
        let m = self.k + 1;
        let (a, b) = (loc % m, loc / m);
        let (fa, da) = lagrange(&self.nodes, a, xi);
        let (fb, db) = lagrange(&self.nodes, b, eta);
        (fa * fb, [da * fb * 2.0 / hx, fa * db * 2.0 / hy])
    }

    /// Value and gradient of a broken function with global coefficients `c`
    /// restricted to element `e`.
    pub fn eval(&self, c: &[f64], e: usize, x: f64, y: f64) -> (f64, [f64; 2]) {
        let d = self.local_dim();
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for loc in 0..d {
            let (p, dp) = self.phi(e, loc, x, y);
            let w = c[e * d + loc];
            v += w * p;
            g[0] += w * dp[0];
            g[1] += w * dp[1];
        }
        (v, g)
    }

    /// Every geometric edge of the mesh with the elements touching it.
    pub fn edges(&self) -> Vec<GeoEdge> {
        let mut map: HashMap<(bool, u64, u64, u64), GeoEdge> = HashMap::new();
        for e in 0..self.elements() {
            let [x0, x1, y0, y1] = self.bbox(e);
            let sides = [
                (true, x0, y0, y1, [-1.0, 0.0]),
                (true, x1, y0, y1, [1.0, 0.0]),
                (false, y0, x0, x1, [0.0, -1.0]),
                (false, y1, x0, x1, [0.0, 1.0]),
            ];
            for (vertical, pos, a, b, normal) in sides {
                let key = (vertical, pos.to_bits(), a.to_bits(), b.to_bits());
                map.entry(key)
                    .or_insert_with(|| GeoEdge {
                        vertical,
                        pos,
                        a,
                        b,
                        touching: Vec::new(),
                    })
                    .touching
                    .push((e, normal));
            }
        }
        let mut out: Vec<GeoEdge> = map.into_values().collect();
        out.sort_by(|p, q| {
            (p.vertical, p.pos, p.a)
                .partial_cmp(&(q.vertical, q.pos, q.a))
                .unwrap()
        });
        out
    }

    /// Penalty weight decided from the edge geometry alone.
    pub fn penalty(&self, edge: &GeoEdge) -> f64 {
        let n = self.n as f64;
        let coarse_x = (1.0 - self.lx) * 2.0 / n;
        let coarse_y = (1.0 - self.ly) * 2.0 / n;
        let len = edge.b - edge.a;
        let (coarse_along, transition) = if edge.vertical {
            (coarse_y, 1.0 - self.lx)
        } else {
            (coarse_x, 1.0 - self.ly)
        };
        if len < 0.5 * coarse_along {
            return n;
        }
        if (edge.pos - transition).abs() < 1e-14 {
            n
        } else if edge.pos < transition {
            1.0
        } else {
            n * n
        }
    }

    pub fn kind(&self, edge: &GeoEdge) -> &'static str {
        let n = self.n as f64;
        let len = edge.b - edge.a;
        let coarse = if edge.vertical {
            (1.0 - self.ly) * 2.0 / n
        } else {
            (1.0 - self.lx) * 2.0 / n
        };
        if len < 0.5 * coarse {
            return "M3";
        }
        let rho = self.penalty(edge);
        if rho == 1.0 {
            "M1"
        } else if rho == n {
            "M4"
        } else {
            "M2"
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeoEdge {
    pub vertical: bool,
    /// Coordinate of the line carrying the edge.
    pub pos: f64,
    pub a: f64,
    pub b: f64,
    /// Elements sharing the edge with their outward normals.
    pub touching: Vec<(usize, [f64; 2])>,
}

impl GeoEdge {
    pub fn point(&self, t: f64) -> (f64, f64) {
        let s = self.a + 0.5 * (t + 1.0) * (self.b - self.a);
        if self.vertical {
            (self.pos, s)
        } else {
            (s, self.pos)
        }
    }

    pub fn jacobian(&self) -> f64 {
        0.5 * (self.b - self.a)
    }
}

/// Coefficients of the corner-layer problem.
pub fn convection(x: f64, y: f64) -> [f64; 2] {
    [3.0 - x, 4.0 - y]
}

pub const REACTION: f64 = 1.0;
pub const C0_SQUARED: f64 = 2.0;

/// Dense NIPG matrix, row = test, column = trial, with `+` the element of
/// larger label.
pub fn dense_matrix(g: &Grid, eps: f64, reversed: bool) -> Vec<Vec<f64>> {
    let nd = g.dofs();
    let d = g.local_dim();
    let ne = g.elements();
    let label = |e: usize| if reversed { ne - 1 - e } else { e };
    let (qp, qw) = gauss(8);
    let mut a = vec![vec![0.0; nd]; nd];

    for e in 0..ne {
        let [x0, x1, y0, y1] = g.bbox(e);
        let jac = 0.25 * (x1 - x0) * (y1 - y0);
        for (p, wp) in qp.iter().zip(&qw) {
            for (q, wq) in qp.iter().zip(&qw) {
                let x = x0 + 0.5 * (p + 1.0) * (x1 - x0);
                let y = y0 + 0.5 * (q + 1.0) * (y1 - y0);
                let b = convection(x, y);
                let w = wp * wq * jac;
                for i in 0..d {
                    let (vi, gi) = g.phi(e, i, x, y);
                    for j in 0..d {
                        let (uj, gj) = g.phi(e, j, x, y);
                        a[e * d + i][e * d + j] += w
                            * (eps * (gi[0] * gj[0] + gi[1] * gj[1])
                                + (b[0] * gj[0] + b[1] * gj[1]) * vi
                                + REACTION * uj * vi);
                    }
                }
            }
        }
    }

    for edge in g.edges() {
        let rho = g.penalty(&edge);
        let jac = edge.jacobian();
        // (element, sign in the jump, outward normal)
        let (sides, nu): (Vec<(usize, f64)>, [f64; 2]) = if edge.touching.len() == 1 {
            let (e, n) = edge.touching[0];
            (vec![(e, 1.0)], n)
        } else {
            let (e1, n1) = edge.touching[0];
            let (e2, n2) = edge.touching[1];
            if label(e1) > label(e2) {
                (vec![(e1, 1.0), (e2, -1.0)], n1)
            } else {
                (vec![(e2, 1.0), (e1, -1.0)], n2)
            }
        };
        let mean_w = if sides.len() == 1 { 1.0 } else { 0.5 };
        for (t, wt) in qp.iter().zip(&qw) {
            let (x, y) = edge.point(*t);
            let w = wt * jac;
            for &(ev, sv) in &sides {
                for i in 0..d {
                    let (vi, gvi) = g.phi(ev, i, x, y);
                    let jump_v = sv * vi;
                    let mean_dv = mean_w * (gvi[0] * nu[0] + gvi[1] * nu[1]);
                    for &(eu, su) in &sides {
                        for j in 0..d {
                            let (uj, guj) = g.phi(eu, j, x, y);
                            let jump_u = su * uj;
                            let mean_du = mean_w * (guj[0] * nu[0] + guj[1] * nu[1]);
                            a[ev * d + i][eu * d + j] += w
                                * (-eps * mean_du * jump_v + eps * jump_u * mean_dv + rho * jump_u * jump_v);
                        }
                    }
                }
            }
        }
    }

    // upwinding, decided pointwise from b . n
    for edge in g.edges() {
        let jac = edge.jacobian();
        for (idx, &(e, n)) in edge.touching.iter().enumerate() {
            let other = edge.touching.get(1 - idx).map(|t| t.0);
            for (t, wt) in qp.iter().zip(&qw) {
                let (x, y) = edge.point(*t);
                let b = convection(x, y);
                let bn = b[0] * n[0] + b[1] * n[1];
                if bn >= 0.0 {
                    continue;
                }
                let w = wt * jac;
                for i in 0..d {
                    let (vi, _) = g.phi(e, i, x, y);
                    for j in 0..d {
                        let (uj, _) = g.phi(e, j, x, y);
                        a[e * d + i][e * d + j] -= w * bn * uj * vi;
                    }
                    if let Some(o) = other {
                        for j in 0..d {
                            let (uj, _) = g.phi(o, j, x, y);
                            a[e * d + i][o * d + j] += w * bn * uj * vi;
                        }
                    }
                }
            }
        }
    }
    a
}

/// Energy norm components of the broken function `c`, in the order
/// diffusion, reaction, penalty, inflow boundary, inflow jump, outflow
/// boundary.
pub fn norm_components(g: &Grid, eps: f64, c: &[f64]) -> [f64; 6] {
    let (qp, qw) = gauss(8);
    let mut out = [0.0; 6];
    for e in 0..g.elements() {
        let [x0, x1, y0, y1] = g.bbox(e);
        let jac = 0.25 * (x1 - x0) * (y1 - y0);
        for (p, wp) in qp.iter().zip(&qw) {
            for (q, wq) in qp.iter().zip(&qw) {
                let x = x0 + 0.5 * (p + 1.0) * (x1 - x0);
                let y = y0 + 0.5 * (q + 1.0) * (y1 - y0);
                let (v, gv) = g.eval(c, e, x, y);
                out[0] += wp * wq * jac * eps * (gv[0] * gv[0] + gv[1] * gv[1]);
                out[1] += wp * wq * jac * C0_SQUARED * v * v;
            }
        }
    }
    for edge in g.edges() {
        let jac = edge.jacobian();
        let rho = g.penalty(&edge);
        let boundary = edge.touching.len() == 1;
        for (t, wt) in qp.iter().zip(&qw) {
            let (x, y) = edge.point(*t);
            let w = wt * jac;
            let vals: Vec<f64> = edge.touching.iter().map(|&(e, _)| g.eval(c, e, x, y).0).collect();
            let jump = if boundary { vals[0] } else { vals[0] - vals[1] };
            out[2] += w * rho * jump * jump;
            let b = convection(x, y);
            for (idx, &(_, n)) in edge.touching.iter().enumerate() {
                let bn = b[0] * n[0] + b[1] * n[1];
                if boundary {
                    let slot = if bn < 0.0 { 3 } else { 5 };
                    out[slot] += 0.5 * w * bn.abs() * vals[0] * vals[0];
                } else if bn < 0.0 {
                    let diff = vals[idx] - vals[1 - idx];
                    out[4] += 0.5 * w * bn.abs() * diff * diff;
                }
            }
        }
    }
    out
}
