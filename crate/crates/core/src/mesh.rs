//! Piecewise-uniform Shishkin mesh on the unit square.
//!
//! Each direction is split at `1 - lambda` into a coarse band `[0, 1 - lambda]`
//! and a fine band `[1 - lambda, 1]`, each carrying `N/2` uniform intervals.
//! The fine bands resolve the exponential layers at `x = 1` and `y = 1`.
//!
//! Elements are addressed by `(i, j)` with `i` the column (x interval) and `j`
//! the row (y interval). The flat element index is `i * N + j`, i.e. elements
//! are numbered bottom-to-top inside a column and columns left-to-right. This
//! index also fixes the DOF layout. The orientation of jumps on interior edges
//! is controlled separately by [`ElementNumbering`].

use crate::error::{Error, Result};

/// Parameters of a Shishkin mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshConfig {
    /// Intervals per direction; even and at least 8.
    pub n: usize,
    /// Perturbation parameter.
    pub eps: f64,
    /// Mesh constant, normally `k + 3/2`.
    pub sigma: f64,
    /// Lower bound of the first convection component.
    pub beta1: f64,
    /// Lower bound of the second convection component.
    pub beta2: f64,
}

impl MeshConfig {
    pub fn new(n: usize, eps: f64, sigma: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            n,
            eps,
            sigma,
            beta1,
            beta2,
        }
    }

    fn check_positive(&self) -> Result<()> {
        for (name, value) in [
            ("eps", self.eps),
            ("sigma", self.sigma),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidMesh(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Checks the invariants required by [`build_mesh`].
    pub fn validate(&self) -> Result<()> {
        if !self.n.is_multiple_of(2) || self.n < 8 {
            return Err(Error::InvalidMesh(format!(
                "N must be even and at least 8, got {}",
                self.n
            )));
        }
        self.check_positive()
    }

    /// `eps <= 1/N`, the regime the layer-adapted analysis targets.
    pub fn eps_small_enough(&self) -> bool {
        self.eps <= 1.0 / self.n as f64
    }
}

/// `min(1/2, sigma * eps / beta * ln N)`.
pub fn transition_parameter(sigma: f64, eps: f64, beta: f64, n: usize) -> f64 {
    (sigma * eps / beta * (n as f64).ln()).min(0.5)
}

/// Region of the four-way domain split at `(1 - lambda_x, 1 - lambda_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionTag {
    /// Coarse in both directions.
    Omega11,
    /// Layer strip along `x = 1`.
    Omega12,
    /// Layer strip along `y = 1`.
    Omega21,
    /// Corner layer at `(1, 1)`.
    Omega22,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShishkinMesh {
    pub config: MeshConfig,
    pub lambda_x: f64,
    pub lambda_y: f64,
    /// `N + 1` mesh points in x.
    pub x_pts: Vec<f64>,
    /// `N + 1` mesh points in y.
    pub y_pts: Vec<f64>,
    /// `N` interval lengths in x.
    pub h_x: Vec<f64>,
    /// `N` interval lengths in y.
    pub h_y: Vec<f64>,
}

fn shishkin_points(n: usize, lambda: f64) -> Vec<f64> {
    let half = n / 2;
    let coarse = 2.0 * (1.0 - lambda) / n as f64;
    let fine = 2.0 * lambda / n as f64;
    let mut pts: Vec<f64> = (0..=n)
        .map(|i| {
            if i <= half {
                coarse * i as f64
            } else {
                1.0 - lambda + fine * (i - half) as f64
            }
        })
        .collect();
    pts[half] = 1.0 - lambda;
    pts[n] = 1.0;
    pts
}

/// Builds the Shishkin mesh. Rejects odd `N`, `N < 8` and nonpositive
/// parameters; warns when `eps > 1/N`.
pub fn build_mesh(config: MeshConfig) -> Result<ShishkinMesh> {
    config.validate()?;
    Ok(build(config))
}

/// Same construction as [`build_mesh`] but accepts any even `N >= 2`.
///
/// Only meant for tiny meshes in brute-force verification.
pub fn build_mesh_allow_coarse(config: MeshConfig) -> Result<ShishkinMesh> {
    if !config.n.is_multiple_of(2) || config.n < 2 {
        return Err(Error::InvalidMesh(format!(
            "N must be even and at least 2, got {}",
            config.n
        )));
    }
    config.check_positive()?;
    Ok(build(config))
}

fn build(config: MeshConfig) -> ShishkinMesh {
    if !config.eps_small_enough() {
        log::warn!(
            "eps = {:e} exceeds 1/N = {:e}; the mesh is outside the layer-adapted regime",
            config.eps,
            1.0 / config.n as f64
        );
    }
    let lambda_x = transition_parameter(config.sigma, config.eps, config.beta1, config.n);
    let lambda_y = transition_parameter(config.sigma, config.eps, config.beta2, config.n);
    let x_pts = shishkin_points(config.n, lambda_x);
    let y_pts = shishkin_points(config.n, lambda_y);
    let h_x = x_pts.windows(2).map(|w| w[1] - w[0]).collect();
    let h_y = y_pts.windows(2).map(|w| w[1] - w[0]).collect();
    ShishkinMesh {
        config,
        lambda_x,
        lambda_y,
        x_pts,
        y_pts,
        h_x,
        h_y,
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Cell {
    pub fn hx(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn hy(&self) -> f64 {
        self.y1 - self.y0
    }

    /// Affine map from the reference square `(-1, 1)^2`.
    pub fn map(&self, xi: f64, eta: f64) -> (f64, f64) {
        (
            self.x0 + 0.5 * (xi + 1.0) * self.hx(),
            self.y0 + 0.5 * (eta + 1.0) * self.hy(),
        )
    }

    /// Inverse of [`Cell::map`].
    pub fn to_reference(&self, x: f64, y: f64) -> (f64, f64) {
        (
            2.0 * (x - self.x0) / self.hx() - 1.0,
            2.0 * (y - self.y0) / self.hy() - 1.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.hx() * self.hy()
    }
}

impl ShishkinMesh {
    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn num_elements(&self) -> usize {
        self.config.n * self.config.n
    }

    /// Flat element index `i * N + j`.
    pub fn element_index(&self, i: usize, j: usize) -> usize {
        i * self.config.n + j
    }

    /// Inverse of [`ShishkinMesh::element_index`].
    pub fn element_ij(&self, elem: usize) -> (usize, usize) {
        (elem / self.config.n, elem % self.config.n)
    }

    pub fn cell(&self, elem: usize) -> Cell {
        let (i, j) = self.element_ij(elem);
        Cell {
            x0: self.x_pts[i],
            x1: self.x_pts[i + 1],
            y0: self.y_pts[j],
            y1: self.y_pts[j + 1],
        }
    }

    /// Element containing `(x, y)`; points on a mesh line go to the element
    /// above/right of it except on the outer boundary.
    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return None;
        }
        let find = |pts: &[f64], t: f64| {
            let n = pts.len() - 1;
            pts.partition_point(|&p| p <= t).saturating_sub(1).min(n - 1)
        };
        Some(self.element_index(find(&self.x_pts, x), find(&self.y_pts, y)))
    }

    pub fn region_of_index(&self, elem: usize) -> RegionTag {
        let (i, j) = self.element_ij(elem);
        let half = self.config.n / 2;
        match (i >= half, j >= half) {
            (false, false) => RegionTag::Omega11,
            (true, false) => RegionTag::Omega12,
            (false, true) => RegionTag::Omega21,
            (true, true) => RegionTag::Omega22,
        }
    }
}

/// Region of element `(i, j)`.
pub fn region_of(mesh: &ShishkinMesh, i: usize, j: usize) -> Result<RegionTag> {
    let n = mesh.n();
    if i >= n || j >= n {
        return Err(Error::IndexOutOfRange { i, j, n });
    }
    Ok(mesh.region_of_index(mesh.element_index(i, j)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    /// Edge parallel to the y axis (lies on a line `x = x_i`).
    Vertical,
    /// Edge parallel to the x axis (lies on a line `y = y_j`).
    Horizontal,
}

/// Local side of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
            Side::Bottom => Side::Top,
            Side::Top => Side::Bottom,
        }
    }

    /// Reference coordinates of the point with edge parameter `t in [-1, 1]`.
    /// The parameter increases with x on horizontal sides and with y on
    /// vertical sides, so both elements sharing an edge agree on it.
    pub fn reference_point(self, t: f64) -> (f64, f64) {
        match self {
            Side::Left => (-1.0, t),
            Side::Right => (1.0, t),
            Side::Bottom => (t, -1.0),
            Side::Top => (t, 1.0),
        }
    }
}

/// Penalty class of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeType {
    /// Long edge in the coarse region `[0, 1-lx) x [0, 1-ly)`.
    M1,
    /// Long edge inside one of the two layer strips.
    M2,
    /// Short edge.
    M3,
    /// Long edge on a transition line `x = 1-lx` or `y = 1-ly`.
    M4,
}

impl EdgeType {
    /// Penalty weight: 1, N^2, N, N for M1..M4.
    pub fn penalty(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            EdgeType::M1 => 1.0,
            EdgeType::M2 => n * n,
            EdgeType::M3 | EdgeType::M4 => n,
        }
    }
}

/// Which element of an interior edge is the `+` side of the jump.
///
/// The `+` element is the one with the larger label; `ColumnMajor` labels
/// element `(i, j)` by `i * N + j`, `Reversed` by `N^2 - 1 - (i * N + j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ElementNumbering {
    #[default]
    ColumnMajor,
    Reversed,
}

impl ElementNumbering {
    pub fn label(self, elem: usize, num_elements: usize) -> usize {
        match self {
            ElementNumbering::ColumnMajor => elem,
            ElementNumbering::Reversed => num_elements - 1 - elem,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub orientation: Orientation,
    /// Index of the mesh line carrying the edge (`x_line` for vertical edges,
    /// `y_line` for horizontal ones).
    pub line: usize,
    /// Interval index along the line.
    pub span: usize,
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub length: f64,
    /// Element on the `+` side; the only element for boundary edges.
    pub plus: usize,
    pub plus_side: Side,
    /// Element on the `-` side and its local side; `None` on the boundary.
    pub minus: Option<(usize, Side)>,
    /// Unit normal pointing from `plus` to `minus`, outward on the boundary.
    pub normal: [f64; 2],
    pub edge_type: EdgeType,
    pub rho: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }

    /// Physical point of edge parameter `t in [-1, 1]`.
    pub fn point(&self, t: f64) -> (f64, f64) {
        let s = 0.5 * (t + 1.0);
        (
            self.start[0] + s * (self.end[0] - self.start[0]),
            self.start[1] + s * (self.end[1] - self.start[1]),
        )
    }
}

/// Type of an edge from its position on the tensor grid.
///
/// A vertical edge on line `x_line` spanning y interval `span` is long iff
/// `span < N/2`; a horizontal one is long iff its x interval is `< N/2`.
/// Long edges are then sorted by the line they lie on: before the
/// transition line (M1), on it (M4), beyond it (M2).
fn edge_type(n: usize, line: usize, span: usize) -> EdgeType {
    let half = n / 2;
    if span >= half {
        return EdgeType::M3;
    }
    match line.cmp(&half) {
        std::cmp::Ordering::Less => EdgeType::M1,
        std::cmp::Ordering::Equal => EdgeType::M4,
        std::cmp::Ordering::Greater => EdgeType::M2,
    }
}

/// All edges with the default column-major jump orientation.
pub fn classify_edges(mesh: &ShishkinMesh) -> Vec<Edge> {
    classify_edges_with(mesh, ElementNumbering::ColumnMajor)
}

/// All `2N(N+1)` edges, ordered by (orientation, row, column): vertical
/// edges first, then horizontal, each sorted by y index then x index.
pub fn classify_edges_with(mesh: &ShishkinMesh, numbering: ElementNumbering) -> Vec<Edge> {
    let n = mesh.n();
    let ne = mesh.num_elements();
    let mut edges = Vec::with_capacity(2 * n * (n + 1));

    let mut push = |orientation: Orientation,
                    line: usize,
                    span: usize,
                    start: [f64; 2],
                    end: [f64; 2],
                    low: Option<usize>,
                    high: Option<usize>| {
        // `low` is the element left of / below the edge.
        let (low_side, high_side, axis) = match orientation {
            Orientation::Vertical => (Side::Right, Side::Left, 0),
            Orientation::Horizontal => (Side::Top, Side::Bottom, 1),
        };
        let (plus, plus_side, minus) = match (low, high) {
            (Some(a), Some(b)) => {
                if numbering.label(b, ne) > numbering.label(a, ne) {
                    (b, high_side, Some((a, low_side)))
                } else {
                    (a, low_side, Some((b, high_side)))
                }
            }
            (Some(a), None) => (a, low_side, None),
            (None, Some(b)) => (b, high_side, None),
            (None, None) => unreachable!("edge without elements"),
        };
        let mut normal = [0.0; 2];
        normal[axis] = plus_side.outward_normal()[axis];
        let edge_type = edge_type(n, line, span);
        let length = (end[0] - start[0]) + (end[1] - start[1]);
        edges.push(Edge {
            orientation,
            line,
            span,
            start,
            end,
            length,
            plus,
            plus_side,
            minus,
            normal,
            edge_type,
            rho: edge_type.penalty(n),
        });
    };

    for j in 0..n {
        for i in 0..=n {
            let low = (i > 0).then(|| mesh.element_index(i - 1, j));
            let high = (i < n).then(|| mesh.element_index(i, j));
            let x = mesh.x_pts[i];
            push(
                Orientation::Vertical,
                i,
                j,
                [x, mesh.y_pts[j]],
                [x, mesh.y_pts[j + 1]],
                low,
                high,
            );
        }
    }
    for j in 0..=n {
        for i in 0..n {
            let low = (j > 0).then(|| mesh.element_index(i, j - 1));
            let high = (j < n).then(|| mesh.element_index(i, j));
            let y = mesh.y_pts[j];
            push(
                Orientation::Horizontal,
                j,
                i,
                [mesh.x_pts[i], y],
                [mesh.x_pts[i + 1], y],
                low,
                high,
            );
        }
    }
    edges
}

/// Index of the edge on `side` of element `elem` in the output of
/// [`classify_edges_with`].
pub fn edge_of_side(n: usize, elem: usize, side: Side) -> usize {
    let (i, j) = (elem / n, elem % n);
    let vertical = |line: usize, span: usize| span * (n + 1) + line;
    let horizontal = |line: usize, span: usize| n * (n + 1) + line * n + span;
    match side {
        Side::Left => vertical(i, j),
        Side::Right => vertical(i + 1, j),
        Side::Bottom => horizontal(j, i),
        Side::Top => horizontal(j + 1, i),
    }
}

/// Counts of edges per type, in the order M1, M2, M3, M4.
pub fn edge_census(edges: &[Edge]) -> [usize; 4] {
    let mut census = [0; 4];
    for e in edges {
        let slot = match e.edge_type {
            EdgeType::M1 => 0,
            EdgeType::M2 => 1,
            EdgeType::M3 => 2,
            EdgeType::M4 => 3,
        };
        census[slot] += 1;
    }
    census
}
