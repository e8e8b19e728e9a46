//! Linear solvers for the assembled nonsymmetric system.
//!
//! The direct path row-equilibrates the matrix and factors it with faer's
//! sparse LU with partial pivoting, followed by a few steps of iterative
//! refinement. The iterative path is restarted GMRES, right-preconditioned
//! with ILU(0).

use std::fmt;
use std::time::{Duration, Instant};

use faer::linalg::solvers::SolveCore;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat};

use crate::assembly::SparseSystem;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMethod {
    #[default]
    Direct,
    Iterative,
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverMethod::Direct => "direct",
            SolverMethod::Iterative => "iterative",
        })
    }
}

impl std::str::FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "direct" => Ok(SolverMethod::Direct),
            "iterative" | "gmres" => Ok(SolverMethod::Iterative),
            other => Err(Error::Config(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Target relative residual `||A x - b|| / ||b||`.
    pub rel_tol: f64,
    /// Total GMRES iterations across restarts.
    pub max_iters: usize,
    /// Krylov dimension between restarts.
    pub restart: usize,
    /// Estimate `cond_1` of the equilibrated matrix (direct path only).
    pub estimate_condition: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Direct,
            rel_tol: 1e-10,
            max_iters: 5000,
            restart: 100,
            estimate_condition: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::Config(format!(
                "rel_tol must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if self.max_iters == 0 || self.restart == 0 {
            return Err(Error::Config("max_iters and restart must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: SolverMethod,
    /// Krylov iterations; 0 for the direct path.
    pub iterations: usize,
    pub relative_residual: f64,
    pub wall_time: Duration,
    /// 1-norm condition estimate of the row-equilibrated matrix.
    pub condition_estimate: Option<f64>,
    /// `relative_residual <= rel_tol`; a direct solve also counts as
    /// converged at backward error `<= DIRECT_BACKWARD_TOL`.
    pub converged: bool,
    /// Relative residual after each GMRES iteration.
    pub residual_history: Vec<f64>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `b - A x` with each row accumulated in compensated arithmetic, so the
/// result stays meaningful below the rounding level of `|A| |x|`.
pub fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.nrows)
        .map(|r| {
            // Dot2: error-free products and sums, corrections kept in `comp`
            let mut sum = b[r];
            let mut comp = 0.0;
            for (c, v) in a.row(r) {
                let p = -v * x[c];
                let p_err = (-v).mul_add(x[c], -p);
                let t = sum + p;
                let z = t - sum;
                let s_err = (sum - (t - z)) + (p - z);
                sum = t;
                comp += p_err + s_err;
            }
            sum + comp
        })
        .collect()
}

/// Backward error a direct solve must reach when `rel_tol` lies below the
/// rounding floor of the relative residual.
pub const DIRECT_BACKWARD_TOL: f64 = 1e-14;

/// Normwise backward error `||b - A x|| / (|| |A| |x| || + ||b||)`.
pub fn backward_error(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let scale: Vec<f64> = (0..a.nrows)
        .map(|r| a.row(r).map(|(c, v)| (v * x[c]).abs()).sum::<f64>())
        .collect();
    let denom = norm2(&scale) + norm2(b);
    if denom == 0.0 {
        return 0.0;
    }
    norm2(&residual(a, x, b)) / denom
}

/// `||A x - b|| / ||b||`, or `||A x||` when `b = 0`.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r = residual(a, x, b);
    let bn = norm2(b);
    if bn == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / bn
    }
}

/// Solves `system.matrix x = system.rhs`. Iterative non-convergence is not
/// an error: the report carries `converged = false` and the residual reached.
pub fn solve(system: &SparseSystem, cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let a = &system.matrix;
    if a.nrows != a.ncols || a.nrows != system.rhs.len() {
        return Err(Error::SizeMismatch(format!(
            "matrix {}x{} with rhs of length {}",
            a.nrows,
            a.ncols,
            system.rhs.len()
        )));
    }
    match cfg.method {
        SolverMethod::Direct => solve_direct(a, &system.rhs, cfg),
        SolverMethod::Iterative => solve_gmres(a, &system.rhs, cfg),
    }
}

/// Sparse LU of a row-equilibrated matrix `D A`.
pub struct DirectFactorization {
    scale: Vec<f64>,
    scaled: CsrMatrix,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl DirectFactorization {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let scale: Vec<f64> = (0..a.nrows)
            .map(|r| {
                let m = a.row(r).fold(0.0f64, |m, (_, v)| m.max(v.abs()));
                if m > 0.0 {
                    1.0 / m
                } else {
                    1.0
                }
            })
            .collect();
        if scale.iter().zip(0..a.nrows).any(|(_, r)| a.row_nnz(r) == 0) {
            return Err(Error::Solver("matrix has an empty row".into()));
        }
        let mut scaled = a.clone();
        scaled.scale_rows(&scale);
        let triplets: Vec<Triplet<usize, usize, f64>> = (0..scaled.nrows)
            .flat_map(|r| scaled.row(r).map(move |(c, v)| Triplet::new(r, c, v)))
            .collect();
        let csc = SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows, a.ncols, &triplets)
            .map_err(|e| Error::Solver(format!("sparse matrix construction: {e:?}")))?;
        let lu = csc
            .sp_lu()
            .map_err(|e| Error::Solver(format!("LU factorization: {e:?}")))?;
        Ok(Self { scale, scaled, lu })
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = b.iter().zip(&self.scale).map(|(v, s)| v * s).collect();
        self.solve_scaled(&rhs, false)
    }

    fn solve_scaled(&self, rhs: &[f64], transpose: bool) -> Vec<f64> {
        let mut x = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        if transpose {
            self.lu.solve_transpose_in_place_with_conj(Conj::No, x.as_mut());
        } else {
            self.lu.solve_in_place_with_conj(Conj::No, x.as_mut());
        }
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Hager's estimate of `||(D A)^{-1}||_1` times `||D A||_1`.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.scaled.nrows;
        let mut x = vec![1.0 / n as f64; n];
        let mut estimate = 0.0;
        for iter in 0..5 {
            let y = self.solve_scaled(&x, false);
            let norm_y: f64 = y.iter().map(|v| v.abs()).sum();
            if iter > 0 && norm_y <= estimate {
                break;
            }
            estimate = norm_y;
            let sign: Vec<f64> = y.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_scaled(&sign, true);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(jm, m), (j, v)| if v.abs() > m { (j, v.abs()) } else { (jm, m) });
            if zmax <= dot(&z, &x) {
                break;
            }
            x = vec![0.0; n];
            x[jmax] = 1.0;
        }
        estimate * self.scaled.norm_1()
    }
}

fn solve_direct(a: &CsrMatrix, b: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let fact = DirectFactorization::new(a)?;
    let mut x = fact.solve(b);
    let mut res = relative_residual(a, &x, b);
    // iterative refinement with compensated residuals
    for _ in 0..5 {
        if res <= 1e-15 {
            break;
        }
        let r = residual(a, &x, b);
        let dx = fact.solve(&r);
        let trial: Vec<f64> = x.iter().zip(&dx).map(|(p, q)| p + q).collect();
        let trial_res = relative_residual(a, &trial, b);
        if trial_res >= res {
            break;
        }
        x = trial;
        res = trial_res;
    }
    let condition_estimate = cfg.estimate_condition.then(|| fact.condition_estimate());
    let converged = res <= cfg.rel_tol || backward_error(a, &x, b) <= DIRECT_BACKWARD_TOL;
    if !res.is_finite() {
        return Err(Error::Solver("direct solve produced non-finite values".into()));
    }
    Ok((
        x,
        SolveReport {
            method: SolverMethod::Direct,
            iterations: 0,
            relative_residual: res,
            wall_time: start.elapsed(),
            condition_estimate,
            converged,
            residual_history: Vec::new(),
        },
    ))
}

/// ILU(0): incomplete LU restricted to the sparsity pattern of `A`.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows;
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for r in 0..n {
            for p in lu.row_ptr[r]..lu.row_ptr[r + 1] {
                if lu.col_idx[p] == r {
                    diag[r] = p;
                }
            }
            if diag[r] == usize::MAX {
                return Err(Error::Solver(format!("ILU(0): missing diagonal in row {r}")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for p in start..end {
                pos[lu.col_idx[p]] = p;
            }
            for p in start..end {
                let kcol = lu.col_idx[p];
                if kcol >= i {
                    break;
                }
                let pivot = lu.values[diag[kcol]];
                if pivot == 0.0 {
                    return Err(Error::Solver(format!("ILU(0): zero pivot in row {kcol}")));
                }
                let lik = lu.values[p] / pivot;
                lu.values[p] = lik;
                for q in diag[kcol] + 1..lu.row_ptr[kcol + 1] {
                    let j = lu.col_idx[q];
                    if pos[j] != usize::MAX {
                        lu.values[pos[j]] -= lik * lu.values[q];
                    }
                }
            }
            for p in start..end {
                pos[lu.col_idx[p]] = usize::MAX;
            }
            if lu.values[diag[i]] == 0.0 {
                return Err(Error::Solver(format!("ILU(0): zero pivot in row {i}")));
            }
        }
        Ok(Self { lu, diag })
    }

    /// `z = (L U)^{-1} r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.lu.nrows;
        for i in 0..n {
            let mut s = r[i];
            for p in self.lu.row_ptr[i]..self.diag[i] {
                s -= self.lu.values[p] * z[self.lu.col_idx[p]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for p in self.diag[i] + 1..self.lu.row_ptr[i + 1] {
                s -= self.lu.values[p] * z[self.lu.col_idx[p]];
            }
            z[i] = s / self.lu.values[self.diag[i]];
        }
    }
}

fn solve_gmres(a: &CsrMatrix, b: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = a.nrows;
    let precond = Ilu0::new(a)?;
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    let mut history = Vec::new();
    let mut iters = 0usize;
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveReport {
                method: SolverMethod::Iterative,
                iterations: 0,
                relative_residual: 0.0,
                wall_time: start.elapsed(),
                condition_estimate: None,
                converged: true,
                residual_history: history,
            },
        ));
    }
    let m = cfg.restart.min(n.max(1));
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut res = relative_residual(a, &x, b);
    while res > cfg.rel_tol && iters < cfg.max_iters {
        let r = residual(a, &x, b);
        let beta = norm2(&r);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut cols = 0;
        for j in 0..m {
            precond.apply(&basis[j], &mut z);
            a.matvec_into(&z, &mut w);
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[i][j] = hij;
                w.iter_mut().zip(v).for_each(|(wk, vk)| *wk -= hij * vk);
            }
            let hnext = norm2(&w);
            h[j + 1][j] = hnext;
            for i in 0..j {
                let tmp = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = tmp;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            if denom == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = h[j][j] / denom;
                sn[j] = h[j + 1][j] / denom;
            }
            h[j][j] = cs[j] * h[j][j] + sn[j] * h[j + 1][j];
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            cols = j + 1;
            iters += 1;
            let est = g[j + 1].abs() / bnorm;
            history.push(est);
            if est <= cfg.rel_tol || iters >= cfg.max_iters || hnext == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; cols];
        for i in (0..cols).rev() {
            let s: f64 = (i + 1..cols).map(|l| h[i][l] * y[l]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (v, &yi) in basis.iter().zip(&y) {
            update.iter_mut().zip(v).for_each(|(u, vk)| *u += yi * vk);
        }
        precond.apply(&update, &mut z);
        x.iter_mut().zip(&z).for_each(|(xk, zk)| *xk += zk);
        let new_res = relative_residual(a, &x, b);
        if !new_res.is_finite() {
            return Err(Error::Solver("GMRES produced non-finite values".into()));
        }
        res = new_res;
    }
    Ok((
        x,
        SolveReport {
            method: SolverMethod::Iterative,
            iterations: iters,
            relative_residual: res,
            wall_time: start.elapsed(),
            condition_estimate: None,
            converged: res <= cfg.rel_tol,
            residual_history: history,
        },
    ))
}
