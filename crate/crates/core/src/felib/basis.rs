use super::quadrature::gauss_lobatto_nodes;
use crate::error::{Error, Result};

/// Tensor-product Lagrange basis of `Q_k` on `(-1, 1)^2` with nodes at the
/// `k + 1` Gauss–Lobatto points per direction.
///
/// Local index `a + (k + 1) * b` belongs to the node `(nodes[a], nodes[b])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBasis {
    degree: usize,
    nodes: Vec<f64>,
    // 1 / prod_{c != a} (x_a - x_c)
    denom: Vec<f64>,
}

/// Basis values (`val[q][a]`) and derivatives (`der[q][a]`) of the 1D factor
/// at a fixed set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulation1d {
    pub points: Vec<f64>,
    pub val: Vec<Vec<f64>>,
    pub der: Vec<Vec<f64>>,
}

impl ReferenceBasis {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidQuadrature(
                "polynomial degree must be at least 1".into(),
            ));
        }
        let nodes = gauss_lobatto_nodes(degree + 1)?;
        let denom = (0..=degree)
            .map(|a| {
                let prod: f64 = (0..=degree)
                    .filter(|&c| c != a)
                    .map(|c| nodes[a] - nodes[c])
                    .product();
                1.0 / prod
            })
            .collect();
        Ok(Self {
            degree,
            nodes,
            denom,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `(k + 1)^2`.
    pub fn dim(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Values of the `k + 1` one-dimensional Lagrange polynomials at `x`.
    pub fn eval_1d(&self, x: f64) -> Vec<f64> {
        let m = self.degree + 1;
        (0..m)
            .map(|a| {
                let prod: f64 = (0..m)
                    .filter(|&c| c != a)
                    .map(|c| x - self.nodes[c])
                    .product();
                prod * self.denom[a]
            })
            .collect()
    }

    /// Derivatives of the one-dimensional Lagrange polynomials at `x`.
    pub fn eval_1d_deriv(&self, x: f64) -> Vec<f64> {
        let m = self.degree + 1;
        (0..m)
            .map(|a| {
                let mut sum = 0.0;
                for skip in (0..m).filter(|&c| c != a) {
                    let prod: f64 = (0..m)
                        .filter(|&c| c != a && c != skip)
                        .map(|c| x - self.nodes[c])
                        .product();
                    sum += prod;
                }
                sum * self.denom[a]
            })
            .collect()
    }

    pub fn tabulate(&self, points: &[f64]) -> Tabulation1d {
        Tabulation1d {
            points: points.to_vec(),
            val: points.iter().map(|&x| self.eval_1d(x)).collect(),
            der: points.iter().map(|&x| self.eval_1d_deriv(x)).collect(),
        }
    }

    /// All `(k + 1)^2` basis values at `(xi, eta)`.
    pub fn eval(&self, xi: f64, eta: f64) -> Vec<f64> {
        let lx = self.eval_1d(xi);
        let ly = self.eval_1d(eta);
        ly.iter()
            .flat_map(|&vy| lx.iter().map(move |&vx| vx * vy))
            .collect()
    }

    /// Reference gradients `(d/dxi, d/deta)` of all basis functions.
    pub fn eval_grad(&self, xi: f64, eta: f64) -> Vec<[f64; 2]> {
        let lx = self.eval_1d(xi);
        let ly = self.eval_1d(eta);
        let dx = self.eval_1d_deriv(xi);
        let dy = self.eval_1d_deriv(eta);
        let m = self.degree + 1;
        let mut out = Vec::with_capacity(m * m);
        for b in 0..m {
            for a in 0..m {
                out.push([dx[a] * ly[b], lx[a] * dy[b]]);
            }
        }
        out
    }

    /// Evaluates the expansion with coefficients `coeffs` at `(xi, eta)`.
    pub fn eval_expansion(&self, coeffs: &[f64], xi: f64, eta: f64) -> f64 {
        let lx = self.eval_1d(xi);
        let ly = self.eval_1d(eta);
        let m = self.degree + 1;
        let mut sum = 0.0;
        for b in 0..m {
            let row: f64 = (0..m).map(|a| coeffs[a + m * b] * lx[a]).sum();
            sum += row * ly[b];
        }
        sum
    }

    /// Coefficients of the nodal interpolant of `w`.
    pub fn nodal_coefficients(&self, w: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let m = self.degree + 1;
        let mut out = Vec::with_capacity(m * m);
        for b in 0..m {
            for a in 0..m {
                out.push(w(self.nodes[a], self.nodes[b]));
            }
        }
        out
    }
}

/// Basis values at a reference point for degree `k`.
pub fn eval_basis(k: usize, xi: f64, eta: f64) -> Result<Vec<f64>> {
    Ok(ReferenceBasis::new(k)?.eval(xi, eta))
}

/// Reference gradients at a reference point for degree `k`.
pub fn eval_basis_grad(k: usize, xi: f64, eta: f64) -> Result<Vec<[f64; 2]>> {
    Ok(ReferenceBasis::new(k)?.eval_grad(xi, eta))
}
