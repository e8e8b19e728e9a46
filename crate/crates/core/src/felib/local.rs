//! Element-local operators on the reference square: mass matrix, the
//! vertices-edges-element interpolant and the local L2 projection.

use nalgebra::{DMatrix, DVector, LU};

use super::basis::ReferenceBasis;
use super::quadrature::{legendre, QuadratureRule};
use crate::error::{Error, Result};
use crate::mesh::Cell;

/// `M_ij = \int phi_i phi_j` over `(-1, 1)^2`.
pub fn local_mass_matrix(basis: &ReferenceBasis, rule: &QuadratureRule) -> DMatrix<f64> {
    let dim = basis.dim();
    let mut m = DMatrix::zeros(dim, dim);
    for (xi, eta, w) in rule.points_2d() {
        let v = basis.eval(xi, eta);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] += w * v[i] * v[j];
            }
        }
    }
    m
}

fn require_rule(rule: &QuadratureRule, min: usize) -> Result<()> {
    if rule.len() < min {
        return Err(Error::QuadratureTooCoarse {
            got: rule.len(),
            min,
        });
    }
    Ok(())
}

/// Reference edges in the order bottom, right, top, left, as
/// `edge(t) -> (xi, eta)` with `t` the edge-parallel coordinate.
const REFERENCE_EDGES: [fn(f64) -> (f64, f64); 4] = [
    |t| (t, -1.0),
    |t| (1.0, t),
    |t| (t, 1.0),
    |t| (-1.0, t),
];

const REFERENCE_VERTICES: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// The vertices-edges-element interpolant `I: C(K) -> Q_k(K)`.
///
/// Its `(k + 1)^2` defining functionals are the four vertex values, the
/// moments against Legendre polynomials `P_0..P_{k-2}` on each edge, and the
/// moments against `P_a(xi) P_b(eta)`, `a, b <= k - 2`, on the cell. Moments
/// are evaluated with `rule`. The functional matrix is factored once.
#[derive(Debug, Clone)]
pub struct VeeInterpolator {
    basis: ReferenceBasis,
    rule: QuadratureRule,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl VeeInterpolator {
    pub fn new(basis: &ReferenceBasis, rule: &QuadratureRule) -> Result<Self> {
        require_rule(rule, basis.degree() + 1)?;
        let dim = basis.dim();
        let mut mat = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let col = Self::functionals(basis.degree(), rule, |x, y| basis.eval(x, y)[j]);
            mat.set_column(j, &col);
        }
        let lu = mat.lu();
        if !lu.is_invertible() {
            return Err(Error::SingularLocalSystem("vertices-edges-element interpolation"));
        }
        Ok(Self {
            basis: basis.clone(),
            rule: rule.clone(),
            lu,
        })
    }

    /// Applies the defining functionals to `w`.
    pub fn functionals(
        k: usize,
        rule: &QuadratureRule,
        w: impl Fn(f64, f64) -> f64,
    ) -> DVector<f64> {
        let mut out = Vec::with_capacity((k + 1) * (k + 1));
        for &(x, y) in &REFERENCE_VERTICES {
            out.push(w(x, y));
        }
        if k >= 2 {
            // tabulate w once per edge, then take all moments
            for edge in REFERENCE_EDGES {
                let samples: Vec<f64> = rule
                    .nodes
                    .iter()
                    .map(|&t| {
                        let (x, y) = edge(t);
                        w(x, y)
                    })
                    .collect();
                for q in 0..=k - 2 {
                    let m: f64 = rule
                        .nodes
                        .iter()
                        .zip(&rule.weights)
                        .zip(&samples)
                        .map(|((&t, &wt), &s)| wt * s * legendre(q, t).0)
                        .sum();
                    out.push(m);
                }
            }
            let n = rule.len();
            let samples: Vec<f64> = rule.points_2d().map(|(x, y, _)| w(x, y)).collect();
            let leg: Vec<Vec<f64>> = rule
                .nodes
                .iter()
                .map(|&t| (0..=k - 2).map(|q| legendre(q, t).0).collect())
                .collect();
            for b in 0..=k - 2 {
                for a in 0..=k - 2 {
                    let mut m = 0.0;
                    for qy in 0..n {
                        for qx in 0..n {
                            m += rule.weights[qx]
                                * rule.weights[qy]
                                * samples[qx + n * qy]
                                * leg[qx][a]
                                * leg[qy][b];
                        }
                    }
                    out.push(m);
                }
            }
        }
        DVector::from_vec(out)
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Coefficients of `I w` for `w` given on the reference square.
    pub fn interpolate(&self, w: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let rhs = Self::functionals(self.basis.degree(), &self.rule, w);
        self.lu
            .solve(&rhs)
            .expect("functional matrix checked invertible")
            .as_slice()
            .to_vec()
    }
}

/// Local `L^2` projection onto `Q_k` of a cell.
///
/// The cell map is affine with constant Jacobian, so projecting on the
/// physical cell equals projecting the pulled-back function on the
/// reference square.
#[derive(Debug, Clone)]
pub struct L2Projector {
    basis: ReferenceBasis,
    rule: QuadratureRule,
    // basis values at the tensor points of `rule`, point-major
    values: Vec<Vec<f64>>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl L2Projector {
    pub fn new(basis: &ReferenceBasis, rule: &QuadratureRule) -> Result<Self> {
        require_rule(rule, basis.degree() + 1)?;
        let mass = local_mass_matrix(basis, rule);
        let chol = mass
            .cholesky()
            .ok_or(Error::SingularLocalSystem("local mass matrix"))?;
        let values = rule.points_2d().map(|(x, y, _)| basis.eval(x, y)).collect();
        Ok(Self {
            basis: basis.clone(),
            rule: rule.clone(),
            values,
            chol,
        })
    }

    /// Projects `w` given on the reference square.
    pub fn project(&self, w: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let dim = self.basis.dim();
        let mut rhs = DVector::zeros(dim);
        for ((x, y, wt), v) in self.rule.points_2d().zip(&self.values) {
            let f = w(x, y);
            for i in 0..dim {
                rhs[i] += wt * f * v[i];
            }
        }
        self.chol.solve(&rhs).as_slice().to_vec()
    }

    /// Projects a function given in physical coordinates on `cell`.
    pub fn project_on_cell(&self, cell: &Cell, w: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.project(|xi, eta| {
            let (x, y) = cell.map(xi, eta);
            w(x, y)
        })
    }
}

/// Vertices-edges-element interpolation of `w` (reference coordinates).
pub fn vee_interpolation_local(
    k: usize,
    w: impl Fn(f64, f64) -> f64,
    rule: &QuadratureRule,
) -> Result<Vec<f64>> {
    let basis = ReferenceBasis::new(k)?;
    Ok(VeeInterpolator::new(&basis, rule)?.interpolate(w))
}

/// Local L2 projection of `w` (physical coordinates) on `cell`.
pub fn l2_projection_local(
    k: usize,
    w: impl Fn(f64, f64) -> f64,
    cell: &Cell,
    rule: &QuadratureRule,
) -> Result<Vec<f64>> {
    let basis = ReferenceBasis::new(k)?;
    Ok(L2Projector::new(&basis, rule)?.project_on_cell(cell, w))
}

#[cfg(test)]
mod tests {
    use super::super::quadrature::gauss_legendre;
    use super::*;

    #[test]
    fn bilinear_mass_matrix() {
        let basis = ReferenceBasis::new(1).unwrap();
        let m = local_mass_matrix(&basis, &gauss_legendre(3).unwrap());
        // kron([[2/3, 1/3], [1/3, 2/3]]) in the order (-1,-1), (1,-1), (-1,1), (1,1)
        let expect = DMatrix::from_row_slice(
            4,
            4,
            &[4., 2., 2., 1., 2., 4., 1., 2., 2., 1., 4., 2., 1., 2., 2., 4.],
        ) / 9.0;
        assert!((&m - &expect).amax() < 1e-15);
        assert!((m.sum() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn mass_matrix_symmetric() {
        for k in 1..=3 {
            let basis = ReferenceBasis::new(k).unwrap();
            let m = local_mass_matrix(&basis, &gauss_legendre(k + 2).unwrap());
            assert!((&m - m.transpose()).amax() <= 1e-14);
        }
    }

    #[test]
    fn vee_k1_is_vertex_interpolation() {
        let rule = gauss_legendre(3).unwrap();
        let c = vee_interpolation_local(1, |x, y| 1.0 + 2.0 * x - y + 0.5 * x * y, &rule).unwrap();
        let basis = ReferenceBasis::new(1).unwrap();
        let expect = basis.nodal_coefficients(|x, y| 1.0 + 2.0 * x - y + 0.5 * x * y);
        for (a, b) in c.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn vee_conditions_for_cubic_data() {
        // k = 2, w = xi^3: check the three functional families on the output
        // with an independent, finer rule.
        let k = 2;
        let rule = gauss_legendre(k + 2).unwrap();
        let c = vee_interpolation_local(k, |x, _| x.powi(3), &rule).unwrap();
        let basis = ReferenceBasis::new(k).unwrap();
        let fine = gauss_legendre(2 * (k + 2)).unwrap();
        let p = |x: f64, y: f64| basis.eval_expansion(&c, x, y);
        let lhs = VeeInterpolator::functionals(k, &fine, p);
        let rhs = VeeInterpolator::functionals(k, &fine, |x, _| x.powi(3));
        assert_eq!(lhs.len(), 9);
        assert!((lhs - rhs).amax() < 1e-13);
    }

    #[test]
    fn l2_projection_of_xi_squared() {
        let rule = gauss_legendre(3).unwrap();
        let cell = Cell {
            x0: -1.0,
            x1: 1.0,
            y0: -1.0,
            y1: 1.0,
        };
        let c = l2_projection_local(1, |x, _| x * x, &cell, &rule).unwrap();
        for v in &c {
            assert!((v - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn too_coarse_rule_rejected() {
        let rule = gauss_legendre(2).unwrap();
        assert!(matches!(
            vee_interpolation_local(2, |_, _| 0.0, &rule),
            Err(Error::QuadratureTooCoarse { got: 2, min: 3 })
        ));
    }
}
