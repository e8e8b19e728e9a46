//! Convergence studies over `(k, eps, N)` and their CSV / markdown tables.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{convergence_rates, error_quad_points, moment_quad_points, supercloseness_error};
use crate::assembly::{assemble, AssemblyOptions, BoundaryTreatment, DgFunction, DgSpace};
use crate::error::{Error, Result};
use crate::mesh::{build_mesh, MeshConfig};
use crate::problem::CornerLayerProblem;
use crate::solver::{solve, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaRule {
    /// `sigma = k + 3/2`
    KPlusThreeHalves,
    Explicit(f64),
}

impl SigmaRule {
    pub fn sigma(&self, k: usize) -> f64 {
        match *self {
            SigmaRule::KPlusThreeHalves => k as f64 + 1.5,
            SigmaRule::Explicit(s) => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemChoice {
    /// The corner-layer problem with `b = (3 - x, 4 - y)`, `c = 1`.
    CornerLayer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub k_list: Vec<usize>,
    pub eps_list: Vec<f64>,
    /// `None` selects a default chain from 8 up to [`default_n_max`].
    pub n_list: Option<Vec<usize>>,
    pub sigma_rule: SigmaRule,
    pub beta1: f64,
    pub beta2: f64,
    pub problem: ProblemChoice,
    pub solver: SolverConfig,
    /// Assembly Gauss points per direction; `None` means `k + 2`.
    pub quad_order: Option<usize>,
    pub boundary: BoundaryTreatment,
    /// Record wall times; when off, `wall_ms` is written as 0 so that
    /// repeated runs produce identical bytes.
    pub timing: bool,
    pub out_csv: Option<PathBuf>,
    pub out_md: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            k_list: vec![1, 2, 3],
            eps_list: (3..=9).map(|p| 10f64.powi(-p)).collect(),
            n_list: None,
            sigma_rule: SigmaRule::KPlusThreeHalves,
            beta1: 2.0,
            beta2: 3.0,
            problem: ProblemChoice::CornerLayer,
            solver: SolverConfig::default(),
            quad_order: None,
            boundary: BoundaryTreatment::Weak,
            timing: true,
            out_csv: None,
            out_md: None,
        }
    }
}

/// Largest `N` of the default chain for degree `k`.
pub fn default_n_max(k: usize) -> usize {
    match k {
        1 => 256,
        2 => 128,
        _ => 64,
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{s}`")))
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{}`", value.trim())))
}

fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config(format!("`{key}`: expected on/off, got `{other}`"))),
    }
}

impl StudyConfig {
    /// Parses flat `key = value` text. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key. Command-line flags go through the same path.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "k" => self.k_list = parse_list(key, value)?,
            "eps" => self.eps_list = parse_list(key, value)?,
            "n" | "N" => {
                self.n_list = match value.trim() {
                    "default" => None,
                    v => Some(parse_list(key, v)?),
                }
            }
            "sigma" => {
                self.sigma_rule = match value.trim() {
                    "k+3/2" | "k_plus_3_half" => SigmaRule::KPlusThreeHalves,
                    v => SigmaRule::Explicit(parse_one(key, v)?),
                }
            }
            "beta1" => self.beta1 = parse_one(key, value)?,
            "beta2" => self.beta2 = parse_one(key, value)?,
            "problem" => {
                self.problem = match value.trim() {
                    "builtin" | "corner_layer" => ProblemChoice::CornerLayer,
                    other => {
                        return Err(Error::Config(format!(
                            "unsupported problem `{other}`; only `builtin` is available from configuration files"
                        )))
                    }
                }
            }
            "solver" => self.solver.method = value.parse()?,
            "rel_tol" => self.solver.rel_tol = parse_one(key, value)?,
            "max_iters" => self.solver.max_iters = parse_one(key, value)?,
            "restart" => self.solver.restart = parse_one(key, value)?,
            "condition_estimate" => self.solver.estimate_condition = parse_switch(key, value)?,
            "quad_order" => {
                self.quad_order = match value.trim() {
                    "default" => None,
                    v => Some(parse_one(key, v)?),
                }
            }
            "boundary" => {
                self.boundary = match value.trim() {
                    "weak" => BoundaryTreatment::Weak,
                    "strong" => BoundaryTreatment::Strong,
                    other => return Err(Error::Config(format!("unknown boundary treatment `{other}`"))),
                }
            }
            "timing" => self.timing = parse_switch(key, value)?,
            "out_csv" => self.out_csv = Some(PathBuf::from(value.trim())),
            "out_md" => self.out_md = Some(PathBuf::from(value.trim())),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_list.is_empty() || self.eps_list.is_empty() {
            return Err(Error::Config("k and eps lists must be nonempty".into()));
        }
        if let Some(&k) = self.k_list.iter().find(|&&k| k == 0) {
            return Err(Error::Config(format!("polynomial degree must be at least 1, got {k}")));
        }
        if let Some(e) = self.eps_list.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("eps must be positive, got {e}")));
        }
        if let Some(ns) = &self.n_list {
            if ns.is_empty() {
                return Err(Error::Config("n list must be nonempty".into()));
            }
            if let Some(&n) = ns.iter().find(|&&n| n < 8 || n % 2 != 0) {
                return Err(Error::Config(format!("N must be even and at least 8, got {n}")));
            }
            if ns.windows(2).any(|w| w[1] != 2 * w[0]) {
                return Err(Error::Config(format!("n list {ns:?} is not a doubling chain")));
            }
        }
        if let SigmaRule::Explicit(s) = self.sigma_rule {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("sigma must be positive, got {s}")));
            }
        }
        if !(self.beta1 > 0.0 && self.beta2 > 0.0) {
            return Err(Error::Config("beta1 and beta2 must be positive".into()));
        }
        if let Some(q) = self.quad_order {
            if let Some(&k) = self.k_list.iter().find(|&&k| q < k + 1) {
                return Err(Error::QuadratureTooCoarse { got: q, min: k + 1 });
            }
        }
        self.solver.validate()
    }

    pub fn n_chain(&self, k: usize) -> Vec<usize> {
        match &self.n_list {
            Some(ns) => ns.clone(),
            None => std::iter::successors(Some(8usize), |n| Some(2 * n))
                .take_while(|&n| n <= default_n_max(k))
                .collect(),
        }
    }

    /// Every resolved setting, one `key: value` per line.
    pub fn echo(&self) -> Vec<String> {
        let join = |v: Vec<String>| v.join(",");
        let mut out = vec![
            "problem: -eps Lap u + (3-x, 4-y) . grad u + u = f on (0,1)^2, u = 0 on the boundary".to_string(),
            "exact: sin(x) (1 - exp(-2(1-x)/eps)) sin(2y) (1 - exp(-3(1-y)/eps))".to_string(),
            format!("k: {}", join(self.k_list.iter().map(|k| k.to_string()).collect())),
            format!("eps: {}", join(self.eps_list.iter().map(|e| format!("{e:e}")).collect())),
        ];
        for &k in &self.k_list {
            let ns = join(self.n_chain(k).iter().map(|n| n.to_string()).collect());
            out.push(format!(
                "k={k}: N = {ns}; sigma = {}; assembly quadrature = {} points; moment quadrature = {} points; error quadrature = {} points",
                self.sigma_rule.sigma(k),
                self.quad_order.unwrap_or(k + 2),
                moment_quad_points(k),
                error_quad_points(k)
            ));
        }
        out.push(format!("beta1: {}; beta2: {}", self.beta1, self.beta2));
        out.push(
            "penalty: M1 (long, coarse region) = 1; M2 (long, layer region) = N^2; M3 (short) = N; M4 (long, on transition lines) = N".into(),
        );
        out.push("boundary edges: typed by the interior rule (length and position)".into());
        out.push(format!("boundary condition: {}", self.boundary));
        out.push(format!(
            "solver: {}; rel_tol = {:e}; max_iters = {}; restart = {}",
            self.solver.method, self.solver.rel_tol, self.solver.max_iters, self.solver.restart
        ));
        out.push(format!("timing: {}", if self.timing { "on" } else { "off" }));
        out
    }
}

/// One `(k, eps, N)` cell, in CSV schema order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub k: usize,
    pub eps: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub dofs: usize,
    #[serde(rename = "e_IN")]
    pub e_in: f64,
    #[serde(rename = "p_IN")]
    pub p_in: Option<f64>,
    #[serde(rename = "e_Pi")]
    pub e_pi: f64,
    #[serde(rename = "e_L2")]
    pub e_l2: f64,
    pub solver_iters: usize,
    pub residual: f64,
    pub wall_ms: u64,
}

/// Solver diagnostics that do not fit the CSV schema.
#[derive(Debug, Clone, PartialEq)]
pub struct CellDiagnostics {
    pub k: usize,
    pub eps: f64,
    pub n: usize,
    pub condition_estimate: Option<f64>,
    pub degraded: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub config_echo: Vec<String>,
    pub rows: Vec<StudyRow>,
    pub diagnostics: Vec<CellDiagnostics>,
}

impl StudyReport {
    pub fn any_degraded(&self) -> bool {
        self.diagnostics.iter().any(|d| d.degraded)
    }
}

struct CellOutcome {
    row: StudyRow,
    diag: CellDiagnostics,
}

/// Solves one cell. Errors other than configuration errors end up as a
/// degraded row.
pub fn run_cell(cfg: &StudyConfig, k: usize, eps: f64, n: usize) -> Result<(StudyRow, CellDiagnostics)> {
    let c = cell(cfg, k, eps, n)?;
    Ok((c.row, c.diag))
}

fn cell(cfg: &StudyConfig, k: usize, eps: f64, n: usize) -> Result<CellOutcome> {
    let start = Instant::now();
    let mesh = build_mesh(MeshConfig::new(n, eps, cfg.sigma_rule.sigma(k), cfg.beta1, cfg.beta2))?;
    let space = DgSpace::new(mesh, k)?;
    let problem = match cfg.problem {
        ProblemChoice::CornerLayer => CornerLayerProblem::new(eps),
    };
    let opts = AssemblyOptions {
        quad_points: cfg.quad_order,
        boundary: cfg.boundary,
    };
    let system = assemble(&space, &problem, &opts)?;
    let dofs = system.rhs.len();
    let wall = |start: Instant| if cfg.timing { start.elapsed().as_millis() as u64 } else { 0 };

    let failed = |note: String| CellOutcome {
        row: StudyRow {
            k,
            eps,
            n,
            dofs,
            e_in: f64::NAN,
            p_in: None,
            e_pi: f64::NAN,
            e_l2: f64::NAN,
            solver_iters: 0,
            residual: f64::NAN,
            wall_ms: wall(start),
        },
        diag: CellDiagnostics {
            k,
            eps,
            n,
            condition_estimate: None,
            degraded: true,
            note,
        },
    };

    let (x, report) = match solve(&system, &cfg.solver) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("k={k} eps={eps:e} N={n}: {e}");
            return Ok(failed(e.to_string()));
        }
    };
    let uh = DgFunction::from_coeffs(space.dofmap, x)?;
    let rec = match supercloseness_error(&space, &problem, &uh) {
        Ok(r) => r,
        Err(e) => return Ok(failed(e.to_string())),
    };
    let mut note = String::new();
    if !report.converged {
        note = format!("residual {:e} above tolerance {:e}", report.relative_residual, cfg.solver.rel_tol);
        log::warn!("k={k} eps={eps:e} N={n}: {note}");
    } else if report.relative_residual > cfg.solver.rel_tol {
        note = format!(
            "residual {:e} at the rounding floor; backward error below {:e}",
            report.relative_residual,
            crate::solver::DIRECT_BACKWARD_TOL
        );
    }
    let finite = rec.e_in.is_finite() && rec.e_pi.is_finite() && rec.e_l2.is_finite();
    if !finite {
        note = "non-finite error".into();
    }
    Ok(CellOutcome {
        row: StudyRow {
            k,
            eps,
            n,
            dofs,
            e_in: rec.e_in,
            p_in: None,
            e_pi: rec.e_pi,
            e_l2: rec.e_l2,
            solver_iters: report.iterations,
            residual: report.relative_residual,
            wall_ms: wall(start),
        },
        diag: CellDiagnostics {
            k,
            eps,
            n,
            condition_estimate: report.condition_estimate,
            degraded: !report.converged || !finite,
            note,
        },
    })
}

/// Runs every `(k, eps, N)` cell. Cells run in parallel; rows come back
/// ordered by `k`, then `eps` as listed, then `N`.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let cells: Vec<(usize, f64, usize)> = cfg
        .k_list
        .iter()
        .flat_map(|&k| {
            cfg.eps_list
                .iter()
                .flat_map(move |&eps| cfg.n_chain(k).into_iter().map(move |n| (k, eps, n)))
        })
        .collect();
    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|&(k, eps, n)| cell(cfg, k, eps, n))
        .collect::<Result<_>>()?;

    let mut rows: Vec<StudyRow> = outcomes.iter().map(|o| o.row).collect();
    let diagnostics: Vec<CellDiagnostics> = outcomes.into_iter().map(|o| o.diag).collect();
    fill_rates(&mut rows, &diagnostics)?;
    Ok(StudyReport {
        config_echo: cfg.echo(),
        rows,
        diagnostics,
    })
}

fn fill_rates(rows: &mut [StudyRow], diags: &[CellDiagnostics]) -> Result<()> {
    let mut start = 0;
    while start < rows.len() {
        let (k, eps) = (rows[start].k, rows[start].eps);
        let end = start
            + rows[start..]
                .iter()
                .take_while(|r| r.k == k && r.eps == eps)
                .count();
        let usable: Vec<(usize, f64)> = rows[start..end]
            .iter()
            .zip(&diags[start..end])
            .filter(|(r, d)| !d.degraded && r.e_in > 0.0 && r.e_in.is_finite())
            .map(|(r, _)| (r.n, r.e_in))
            .collect();
        let rates = convergence_rates(&usable)?;
        for row in &mut rows[start..end] {
            row.p_in = rates.iter().find(|(n, _)| *n == row.n).and_then(|(_, p)| *p);
        }
        start = end;
    }
    Ok(())
}

const CSV_HEADER: &str = "k,eps,N,dofs,e_IN,p_IN,e_Pi,e_L2,solver_iters,residual,wall_ms";

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Writes the CSV table. Configuration and diagnostics lead as `#` lines.
pub fn write_csv<W: Write>(report: &StudyReport, mut out: W) -> Result<()> {
    for line in &report.config_echo {
        writeln!(out, "# {line}")?;
    }
    for d in &report.diagnostics {
        writeln!(
            out,
            "# diag k={} eps={:e} N={} cond={} degraded={} note={}",
            d.k,
            d.eps,
            d.n,
            d.condition_estimate.map(|c| format!("{c:e}")).unwrap_or_else(|| "-".into()),
            d.degraded,
            d.note
        )?;
    }
    writeln!(out, "{CSV_HEADER}")?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{:e},{},{},{:e},{},{:e},{:e},{},{:e},{}",
            r.k,
            r.eps,
            r.n,
            r.dofs,
            r.e_in,
            opt_f64(r.p_in),
            r.e_pi,
            r.e_l2,
            r.solver_iters,
            r.residual,
            r.wall_ms
        )?;
    }
    Ok(())
}

fn parse_diag(line: &str) -> Result<CellDiagnostics> {
    let bad = || Error::Config(format!("malformed diagnostics line `{line}`"));
    let body = line.strip_prefix("diag ").ok_or_else(bad)?;
    let (fields, note) = body.split_once(" note=").ok_or_else(bad)?;
    let mut d = CellDiagnostics {
        k: 0,
        eps: 0.0,
        n: 0,
        condition_estimate: None,
        degraded: false,
        note: note.to_string(),
    };
    for kv in fields.split_whitespace() {
        let (key, value) = kv.split_once('=').ok_or_else(bad)?;
        match key {
            "k" => d.k = value.parse().map_err(|_| bad())?,
            "eps" => d.eps = value.parse().map_err(|_| bad())?,
            "N" => d.n = value.parse().map_err(|_| bad())?,
            "cond" if value == "-" => d.condition_estimate = None,
            "cond" => d.condition_estimate = Some(value.parse().map_err(|_| bad())?),
            "degraded" => d.degraded = value.parse().map_err(|_| bad())?,
            _ => return Err(bad()),
        }
    }
    Ok(d)
}

/// Reads the output of [`write_csv`].
pub fn parse_csv(text: &str) -> Result<StudyReport> {
    let mut config_echo = Vec::new();
    let mut diagnostics = Vec::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim_start();
        if body.starts_with("diag ") {
            diagnostics.push(parse_diag(body)?);
        } else {
            config_echo.push(body.to_string());
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let rows = reader.deserialize().collect::<std::result::Result<Vec<StudyRow>, _>>()?;
    Ok(StudyReport {
        config_echo,
        rows,
        diagnostics,
    })
}

/// `0.219E+0` style: three significant digits, mantissa in `[0.1, 1)`.
pub fn format_paper(e: f64) -> String {
    if !e.is_finite() {
        return "NaN".into();
    }
    if e == 0.0 {
        return "0.000E+0".into();
    }
    let mut exp = e.abs().log10().floor() as i32 + 1;
    let mut mant = (e.abs() / 10f64.powi(exp) * 1000.0).round() / 1000.0;
    if mant >= 1.0 {
        mant /= 10.0;
        exp += 1;
    }
    let sign = if e < 0.0 { "-" } else { "" };
    let esign = if exp < 0 { '-' } else { '+' };
    format!("{sign}{mant:.3}E{esign}{}", exp.abs())
}

/// One table per `k`: rows are `N`, column pairs `(e, p)` per `eps`.
pub fn write_markdown<W: Write>(report: &StudyReport, mut out: W) -> Result<()> {
    let mut text = String::new();
    let mut ks: Vec<usize> = report.rows.iter().map(|r| r.k).collect();
    ks.dedup();
    for k in ks {
        let rows: Vec<(&StudyRow, &CellDiagnostics)> = report
            .rows
            .iter()
            .zip(&report.diagnostics)
            .filter(|(r, _)| r.k == k)
            .collect();
        let mut epss: Vec<f64> = Vec::new();
        let mut ns: Vec<usize> = Vec::new();
        for (r, _) in &rows {
            if !epss.contains(&r.eps) {
                epss.push(r.eps);
            }
            if !ns.contains(&r.n) {
                ns.push(r.n);
            }
        }
        let _ = writeln!(text, "## |||I_N u - u_h||| for k = {k}\n");
        let _ = write!(text, "| N |");
        for e in &epss {
            let _ = write!(text, " e ({e:e}) | p |");
        }
        let _ = writeln!(text);
        let _ = writeln!(text, "|---|{}", "---|---|".repeat(epss.len()));
        for &n in &ns {
            let _ = write!(text, "| {n} |");
            for &eps in &epss {
                match rows.iter().find(|(r, _)| r.n == n && r.eps == eps) {
                    Some((r, d)) => {
                        let mark = if d.degraded { " (degraded)" } else { "" };
                        let p = r.p_in.map(|p| format!("{p:.2}")).unwrap_or_else(|| "--".into());
                        let _ = write!(text, " {}{mark} | {p} |", format_paper(r.e_in));
                    }
                    None => {
                        let _ = write!(text, " | |");
                    }
                }
            }
            let _ = writeln!(text);
        }
        let _ = writeln!(text);
    }
    let _ = writeln!(text, "## Diagnostics\n");
    let _ = writeln!(text, "| k | eps | N | dofs | e_Pi | e_L2 | residual | cond_1 | status |");
    let _ = writeln!(text, "|---|---|---|---|---|---|---|---|---|");
    for (r, d) in report.rows.iter().zip(&report.diagnostics) {
        let cond = d.condition_estimate.map(|c| format!("{c:.2e}")).unwrap_or_else(|| "-".into());
        let status = match (d.degraded, d.note.is_empty()) {
            (true, _) => format!("degraded: {}", d.note),
            (false, true) => "ok".into(),
            (false, false) => format!("ok: {}", d.note),
        };
        let _ = writeln!(
            text,
            "| {} | {:e} | {} | {} | {} | {} | {:.1e} | {cond} | {status} |",
            r.k,
            r.eps,
            r.n,
            r.dofs,
            format_paper(r.e_pi),
            format_paper(r.e_l2),
            r.residual
        );
    }
    let _ = writeln!(text, "\n## Configuration\n");
    for line in &report.config_echo {
        let _ = writeln!(text, "- {line}");
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

/// Writes the CSV and markdown files named in the configuration.
pub fn emit_tables(report: &StudyReport, cfg: &StudyConfig) -> Result<()> {
    if let Some(path) = &cfg.out_csv {
        write_csv(report, std::io::BufWriter::new(std::fs::File::create(path)?))?;
    }
    if let Some(path) = &cfg.out_md {
        write_markdown(report, std::io::BufWriter::new(std::fs::File::create(path)?))?;
    }
    Ok(())
}
