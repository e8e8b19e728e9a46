//! Coefficient fields of `-eps Lap u + b . grad u + c u = f` with `u = 0` on
//! the boundary of the unit square.

use std::sync::Arc;

/// Data of a convection-diffusion-reaction problem.
pub trait Problem: Send + Sync {
    /// Diffusion coefficient `eps`.
    fn eps(&self) -> f64;
    /// Convection field `b = (b1, b2)`.
    fn convection(&self, x: f64, y: f64) -> [f64; 2];
    /// `div b`.
    fn div_convection(&self, x: f64, y: f64) -> f64;
    /// Reaction coefficient `c`.
    fn reaction(&self, x: f64, y: f64) -> f64;
    /// Right-hand side `f`.
    fn source(&self, x: f64, y: f64) -> f64;
    /// Exact solution, when known.
    fn exact(&self) -> Option<&dyn ExactSolution> {
        None
    }

    /// `c0^2 = c - div(b) / 2`.
    fn c0_squared(&self, x: f64, y: f64) -> f64 {
        self.reaction(x, y) - 0.5 * self.div_convection(x, y)
    }
}

/// A smooth exact solution with its first derivatives and Laplacian.
pub trait ExactSolution: Send + Sync {
    fn value(&self, x: f64, y: f64) -> f64;
    fn gradient(&self, x: f64, y: f64) -> [f64; 2];
    fn laplacian(&self, x: f64, y: f64) -> f64;
}

/// The corner-layer test problem on the unit square:
/// `b = (3 - x, 4 - y)`, `c = 1`, with exact solution
/// `u = sin(x) (1 - e^{-2(1-x)/eps}) sin(2y) (1 - e^{-3(1-y)/eps})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerLayerProblem {
    pub eps: f64,
}

/// Factor `g(t) = s(t) (1 - E(t))` with `E = exp(-rate (1 - t) / eps)` and
/// its derivatives. Exponentials only ever appear with a nonpositive
/// argument.
struct LayerFactor {
    value: f64,
    d1: f64,
    d2: f64,
}

impl CornerLayerProblem {
    pub fn new(eps: f64) -> Self {
        Self { eps }
    }

    // sin(x) (1 - exp(-2 (1 - x) / eps))
    fn factor_x(&self, x: f64) -> LayerFactor {
        let e = (-2.0 * (1.0 - x) / self.eps).exp();
        let a = 2.0 / self.eps;
        let (s, c) = x.sin_cos();
        LayerFactor {
            value: s * (1.0 - e),
            d1: c * (1.0 - e) - s * e * a,
            d2: -s * (1.0 - e) - 2.0 * c * e * a - s * e * a * a,
        }
    }

    // sin(2y) (1 - exp(-3 (1 - y) / eps))
    fn factor_y(&self, y: f64) -> LayerFactor {
        let e = (-3.0 * (1.0 - y) / self.eps).exp();
        let a = 3.0 / self.eps;
        let (s, c) = (2.0 * y).sin_cos();
        LayerFactor {
            value: s * (1.0 - e),
            d1: 2.0 * c * (1.0 - e) - s * e * a,
            d2: -4.0 * s * (1.0 - e) - 4.0 * c * e * a - s * e * a * a,
        }
    }
}

impl Problem for CornerLayerProblem {
    fn eps(&self) -> f64 {
        self.eps
    }

    fn convection(&self, x: f64, y: f64) -> [f64; 2] {
        [3.0 - x, 4.0 - y]
    }

    fn div_convection(&self, _x: f64, _y: f64) -> f64 {
        -2.0
    }

    fn reaction(&self, _x: f64, _y: f64) -> f64 {
        1.0
    }

    /// `f = Y (-eps X'' + (3 - x) X') + X (-eps Y'' + (4 - y) Y') + X Y`.
    ///
    /// The `1/eps` parts of each bracket are combined analytically, which
    /// leaves the bounded products `(1 - x) e^{-2(1-x)/eps} / eps` instead
    /// of a difference of two `O(1/eps)` terms.
    fn source(&self, x: f64, y: f64) -> f64 {
        let eps = self.eps;
        let ex = (-2.0 * (1.0 - x) / eps).exp();
        let ey = (-3.0 * (1.0 - y) / eps).exp();
        let (sx, cx) = x.sin_cos();
        let (sy, cy) = (2.0 * y).sin_cos();
        let xv = sx * (1.0 - ex);
        let yv = sy * (1.0 - ey);
        let lx = eps * sx * (1.0 - ex) + 4.0 * cx * ex + (3.0 - x) * cx * (1.0 - ex)
            - 2.0 * (1.0 - x) / eps * sx * ex;
        let ly = 4.0 * eps * sy * (1.0 - ey)
            + 12.0 * cy * ey
            + 2.0 * (4.0 - y) * cy * (1.0 - ey)
            - 3.0 * (1.0 - y) / eps * sy * ey;
        yv * lx + xv * ly + xv * yv
    }

    fn exact(&self) -> Option<&dyn ExactSolution> {
        Some(self)
    }
}

impl ExactSolution for CornerLayerProblem {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.factor_x(x).value * self.factor_y(y).value
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let fx = self.factor_x(x);
        let fy = self.factor_y(y);
        [fx.d1 * fy.value, fx.value * fy.d1]
    }

    fn laplacian(&self, x: f64, y: f64) -> f64 {
        let fx = self.factor_x(x);
        let fy = self.factor_y(y);
        fx.d2 * fy.value + fx.value * fy.d2
    }
}

type Scalar = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Vector = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;

/// Problem assembled from closures. The source is derived from the exact
/// solution as `f = -eps Lap u + b . grad u + c u`.
#[derive(Clone)]
pub struct ManufacturedProblem {
    pub eps: f64,
    pub b: Vector,
    pub div_b: Scalar,
    pub c: Scalar,
    pub u: Scalar,
    pub grad_u: Vector,
    pub lap_u: Scalar,
}

impl std::fmt::Debug for ManufacturedProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedProblem")
            .field("eps", &self.eps)
            .finish_non_exhaustive()
    }
}

impl Problem for ManufacturedProblem {
    fn eps(&self) -> f64 {
        self.eps
    }

    fn convection(&self, x: f64, y: f64) -> [f64; 2] {
        (self.b)(x, y)
    }

    fn div_convection(&self, x: f64, y: f64) -> f64 {
        (self.div_b)(x, y)
    }

    fn reaction(&self, x: f64, y: f64) -> f64 {
        (self.c)(x, y)
    }

    fn source(&self, x: f64, y: f64) -> f64 {
        let b = (self.b)(x, y);
        let g = (self.grad_u)(x, y);
        -self.eps * (self.lap_u)(x, y) + b[0] * g[0] + b[1] * g[1] + (self.c)(x, y) * (self.u)(x, y)
    }

    fn exact(&self) -> Option<&dyn ExactSolution> {
        Some(self)
    }
}

impl ExactSolution for ManufacturedProblem {
    fn value(&self, x: f64, y: f64) -> f64 {
        (self.u)(x, y)
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        (self.grad_u)(x, y)
    }

    fn laplacian(&self, x: f64, y: f64) -> f64 {
        (self.lap_u)(x, y)
    }
}
