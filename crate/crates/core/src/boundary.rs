//! Early exercise boundary of the American put from the one-dimensional
//! Kim equations, discretized by product integration.
//!
//! Row `i` of the discrete system couples the unknown `B_i` at `t_i = i h`
//! with the already known `B_0..B_{i-1}`:
//!
//! * `delta = 0`:
//!   `x N(d1) + x n(d1)/(s sqrt t) = K e^{-rt} n(d2)/(s sqrt t)
//!      + rK/s sum_j w_ij e^{-r u_j} n(d2(x, u_j, B_j))`
//! * `delta > 0`:
//!   `-x e^{-dt} N(d1) + [K e^{-rt} n(d2) - x e^{-dt} n(d1)]/(s sqrt t)
//!      + 1/s sum_j w_ij [rK e^{-r u_j} n(d2_j) - d x e^{-d u_j} n(d1_j)]
//!      - d x sum_j omega_j e^{-d u_j} N(d1_j) = 0`
//!
//! with `d1 = d1(x, t_i, K)` in the forcing terms, `u_j = t_i - t_j`,
//! `w_ij` the product weights of the `1/sqrt(t_i - s)` kernel and `omega_j`
//! barycentric rational quadrature weights on `[0, t_i]`. Rows are solved one
//! at a time by a safeguarded scalar Newton iteration.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::barycentric::{BaryBasis, Family};
use crate::error::{config, domain, Error, Result};
use crate::exec::Exec;
use crate::market::{
    d12_raw, european_put, norm_cdf_unchecked, norm_pdf, MarketParams, INV_SQRT_2PI,
};
use crate::quadrature::{abel_row, brq_weights_with, gauss_legendre, DEFAULT_PANEL_POINTS};

/// Which weights build the product-integration and direct-quadrature bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Floater-Hormann `FH(d)` everywhere.
    Fh,
    /// Berrut weights on one side, `FH(d)` on the other (see [`BfhSplit`]).
    Bfh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum BfhSplit {
    /// Berrut basis for the singular product weights, `FH(d)` for the
    /// direct quadrature.
    #[default]
    BerrutKernel,
    /// `FH(d)` for the product weights, Berrut for the direct quadrature.
    BerrutQuadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Number of grid intervals; nodes are `t_i = i T / n`, `i = 0..=n`.
    /// For the hybrid scheme this is the number of coarse intervals.
    pub n: usize,
    /// Floater-Hormann order.
    pub d: usize,
    pub scheme: Scheme,
    pub bfh_split: BfhSplit,
    /// Hybrid Newton-interpolation: `m - 2` linearly interpolated points
    /// inside every coarse interval.
    pub hybrid_m: Option<usize>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub fd_rel_step: f64,
    /// Gauss-Legendre points per panel for the weight tables.
    pub panel_points: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl SolverConfig {
    pub fn new(n: usize, d: usize) -> Self {
        SolverConfig {
            n,
            d,
            scheme: Scheme::Fh,
            bfh_split: BfhSplit::default(),
            hybrid_m: None,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            fd_rel_step: 1e-6,
            panel_points: DEFAULT_PANEL_POINTS,
            exec: Exec::default(),
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_hybrid(mut self, m: usize) -> Self {
        self.hybrid_m = Some(m);
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < self.d + 1 || self.n < 1 {
            return config(format!("need n >= d + 1, got n={} d={}", self.n, self.d));
        }
        if let Some(m) = self.hybrid_m {
            if m < 2 {
                return config(format!("hybrid m must be at least 2, got {m}"));
            }
        }
        if !(self.newton_tol > 0.0) || !(self.fd_rel_step > 0.0) || self.newton_max_iter == 0 {
            return config("Newton tolerance, step and iteration cap must be positive");
        }
        if self.panel_points == 0 {
            return config("panel_points must be positive");
        }
        Ok(())
    }

    /// Intervals of the grid the curve is stored on.
    pub fn fine_intervals(&self) -> usize {
        self.n * (self.hybrid_m.unwrap_or(2) - 1)
    }

    /// Stored node count, `n_c + (n_c - 1)(m - 2)` with `n_c = n + 1` coarse
    /// nodes.
    pub fn total_nodes(&self) -> usize {
        hybrid_total_nodes(self.n + 1, self.hybrid_m.unwrap_or(2))
    }

    fn product_family(&self) -> Family {
        match (self.scheme, self.bfh_split) {
            (Scheme::Bfh, BfhSplit::BerrutKernel) => Family::Berrut,
            _ => Family::FloaterHormann(self.d),
        }
    }

    fn direct_family(&self) -> Family {
        match (self.scheme, self.bfh_split) {
            (Scheme::Bfh, BfhSplit::BerrutQuadrature) => Family::Berrut,
            _ => Family::FloaterHormann(self.d),
        }
    }

    pub fn label(&self) -> String {
        let name = match self.scheme {
            Scheme::Fh => "FH",
            Scheme::Bfh => "BFH",
        };
        match self.hybrid_m {
            Some(m) => format!("{name}({},{m})", self.d),
            None => format!("{name}({})", self.d),
        }
    }
}

/// `N = n + (n - 1)(m - 2)` grid points of the hybrid scheme with `n` coarse
/// points.
pub fn hybrid_total_nodes(coarse_nodes: usize, m: usize) -> usize {
    coarse_nodes + coarse_nodes.saturating_sub(1) * m.saturating_sub(2)
}

/// Equispaced time-to-expiry grid `t_i = i h` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub expiry: f64,
}

impl Grid {
    pub fn new(n: usize, expiry: f64) -> Self {
        Grid { n, expiry }
    }

    pub fn spacing(&self) -> f64 {
        self.expiry / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            self.expiry
        } else {
            i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Grid index of the collocated node.
    pub row: usize,
    pub iterations: usize,
    /// Collocation residual at the accepted value.
    pub residual: f64,
    pub bisections: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: Vec<StepDiagnostics>,
    pub warnings: Vec<String>,
    pub wall_time: f64,
}

impl Diagnostics {
    pub fn max_residual(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.residual.abs())
            .fold(0.0, f64::max)
    }

    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }
}

/// Solved boundary values on a grid, evaluable anywhere in `[0, T]` through
/// the barycentric interpolant `B_n(t) = sum_i B_i L_i(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub basis: BaryBasis,
    pub params: MarketParams,
    pub config: SolverConfig,
    pub diagnostics: Diagnostics,
}

impl BoundaryCurve {
    pub fn eval(&self, t: f64) -> Result<f64> {
        let tol = 1e-12 * self.grid.expiry;
        if !(t >= -tol && t <= self.grid.expiry + tol) {
            return domain(format!("t = {t} outside [0, {}]", self.grid.expiry));
        }
        Ok(self
            .basis
            .eval_unchecked(&self.values, t.clamp(0.0, self.grid.expiry)))
    }

    pub fn nodes(&self) -> &[f64] {
        self.basis.nodes()
    }

    pub fn expiry(&self) -> f64 {
        self.grid.expiry
    }
}

pub fn eval_boundary(curve: &BoundaryCurve, t: f64) -> Result<f64> {
    curve.eval(t)
}

/// Limit of the boundary at expiry: `K` when `delta <= r`, else `(r/delta) K`.
pub fn initial_boundary(p: &MarketParams) -> f64 {
    if p.dividend <= p.rate {
        p.strike
    } else {
        p.rate / p.dividend * p.strike
    }
}

/// Negative root `theta` of the perpetual put's characteristic equation,
/// `None` when `r = 0`.
pub fn perpetual_theta(p: &MarketParams) -> Option<f64> {
    if p.rate <= 0.0 {
        return None;
    }
    let s2 = p.vol * p.vol;
    let k = p.rate - p.dividend - 0.5 * s2;
    Some((-k - (k * k + 2.0 * s2 * p.rate).sqrt()) / s2)
}

/// Perpetual put boundary `theta K / (theta - 1)`, a lower bound for the
/// finite-maturity boundary. Zero when `r = 0`.
pub fn perpetual_lower_bound(p: &MarketParams) -> f64 {
    match perpetual_theta(p) {
        Some(theta) => theta * p.strike / (theta - 1.0),
        None => 0.0,
    }
}

/// Kernel terms at one quadrature node: `e^{-r u} n(d2)`, `e^{-d u} n(d1)`,
/// `e^{-d u} N(d1)` with `d1 = d1(x, u, b)`. At `u = 0` these take their
/// limits `n(0)`, `n(0)`, `1/2`.
#[derive(Debug, Clone, Copy)]
struct KernelTerms {
    rate_pdf: f64,
    div_pdf: f64,
    div_cdf: f64,
}

#[inline]
fn kernel_terms(x: f64, b: f64, u: f64, p: &MarketParams) -> KernelTerms {
    if u <= 0.0 {
        return KernelTerms {
            rate_pdf: INV_SQRT_2PI,
            div_pdf: INV_SQRT_2PI,
            div_cdf: 0.5,
        };
    }
    let d = d12_raw(x, u, b, p);
    let ed = (-p.dividend * u).exp();
    KernelTerms {
        rate_pdf: (-p.rate * u).exp() * norm_pdf(d.d2),
        div_pdf: ed * norm_pdf(d.d1),
        div_cdf: ed * norm_cdf_unchecked(d.d1),
    }
}

fn check_kernel_args(i: usize, j: usize, bi: f64, bj: f64) -> Result<()> {
    if j > i {
        return domain(format!("kernel needs j <= i, got i={i} j={j}"));
    }
    if !(bi > 0.0 && bj > 0.0) {
        return domain(format!("boundary values must be positive, got {bi}, {bj}"));
    }
    Ok(())
}

/// Smooth factor of the product-integration kernel for `delta = 0`:
/// `rK/(sigma sqrt(2 pi)) exp(-(r u + d2(B_i, u, B_j)^2 / 2))`, `u = t_i - t_j`.
pub fn kernel_nodiv(
    i: usize,
    j: usize,
    bi: f64,
    bj: f64,
    grid: &Grid,
    p: &MarketParams,
) -> Result<f64> {
    check_kernel_args(i, j, bi, bj)?;
    let u = grid.node(i) - grid.node(j);
    Ok(p.rate * p.strike / p.vol * kernel_terms(bi, bj, u, p).rate_pdf)
}

/// Smooth factor of the product-integration kernel for `delta > 0`:
/// `[rK e^{-r u} n(d2) - delta B_i e^{-delta u} n(d1)] / sigma`.
pub fn kernel_div(
    i: usize,
    j: usize,
    bi: f64,
    bj: f64,
    grid: &Grid,
    p: &MarketParams,
) -> Result<f64> {
    check_kernel_args(i, j, bi, bj)?;
    let u = grid.node(i) - grid.node(j);
    let k = kernel_terms(bi, bj, u, p);
    Ok((p.rate * p.strike * k.rate_pdf - p.dividend * bi * k.div_pdf) / p.vol)
}

/// Integrand of the direct quadrature term, `e^{-delta u} N(d1(B_i, u, B_j))`.
pub fn kernel_direct(
    i: usize,
    j: usize,
    bi: f64,
    bj: f64,
    grid: &Grid,
    p: &MarketParams,
) -> Result<f64> {
    check_kernel_args(i, j, bi, bj)?;
    let u = grid.node(i) - grid.node(j);
    Ok(kernel_terms(bi, bj, u, p).div_cdf)
}

/// Product and direct quadrature weights for the collocated rows of one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTables {
    /// Intervals of the (fine) grid.
    pub n: usize,
    pub expiry: f64,
    rows: HashMap<usize, RowWeights>,
}

#[derive(Debug, Clone, PartialEq)]
struct RowWeights {
    product: Vec<f64>,
    direct: Vec<f64>,
}

impl GridTables {
    /// Weights for every row the configuration collocates.
    pub fn build(cfg: &SolverConfig, p: &MarketParams) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.fine_intervals();
        let stride = cfg.hybrid_m.unwrap_or(2) - 1;
        let rows: Vec<usize> = (1..=cfg.n).map(|c| c * stride).collect();
        Self::build_rows(cfg, n, p.expiry, &rows, p.dividend > 0.0)
    }

    fn build_rows(
        cfg: &SolverConfig,
        n: usize,
        expiry: f64,
        rows: &[usize],
        with_direct: bool,
    ) -> Result<Self> {
        let h = expiry / n as f64;
        let product = BaryBasis::equispaced(0.0, h, n, cfg.product_family())?;
        let direct = BaryBasis::equispaced(0.0, h, n, cfg.direct_family())?;
        let gl = gauss_legendre(cfg.panel_points)?;
        let points = cfg.panel_points;
        let built: Vec<Result<(usize, RowWeights)>> = cfg.exec.map(rows.to_vec(), |i| {
            let psub = product.prefix(i)?;
            let product_row = abel_row(&psub, 0.5, &gl);
            let direct_row = if with_direct {
                let dsub = direct.prefix(i)?;
                brq_weights_with(&dsub, 0.0, dsub.end(), points)?.weights
            } else {
                Vec::new()
            };
            Ok((
                i,
                RowWeights {
                    product: product_row,
                    direct: direct_row,
                },
            ))
        });
        let rows = built.into_iter().collect::<Result<HashMap<_, _>>>()?;
        Ok(GridTables { n, expiry, rows })
    }

    pub fn product_row(&self, i: usize) -> Option<&[f64]> {
        self.rows.get(&i).map(|r| r.product.as_slice())
    }

    pub fn direct_row(&self, i: usize) -> Option<&[f64]> {
        self.rows.get(&i).map(|r| r.direct.as_slice())
    }

    pub fn has_direct(&self) -> bool {
        self.rows.values().any(|r| !r.direct.is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct TableKey {
    n: usize,
    d: usize,
    scheme: Scheme,
    split: BfhSplit,
    m: Option<usize>,
    panel_points: usize,
    expiry_bits: u64,
    direct: bool,
}

/// Weight tables shared between solves on the same grid, keyed by
/// `(n, d, family, m, T)`. Entries are written once and then only read.
#[derive(Debug, Default)]
pub struct TableCache {
    entries: Mutex<HashMap<TableKey, Arc<GridTables>>>,
}

impl TableCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, cfg: &SolverConfig, p: &MarketParams) -> Result<Arc<GridTables>> {
        let key = TableKey {
            n: cfg.n,
            d: cfg.d,
            scheme: cfg.scheme,
            split: cfg.bfh_split,
            m: cfg.hybrid_m,
            panel_points: cfg.panel_points,
            expiry_bits: p.expiry.to_bits(),
            direct: p.dividend > 0.0,
        };
        if let Some(t) = self.entries.lock().expect("table cache poisoned").get(&key) {
            return Ok(Arc::clone(t));
        }
        let built = Arc::new(GridTables::build(cfg, p)?);
        let mut guard = self.entries.lock().expect("table cache poisoned");
        Ok(Arc::clone(guard.entry(key).or_insert(built)))
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("table cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One collocation row: everything except the unknown `x = B_i`.
struct Row<'a> {
    i: usize,
    h: f64,
    p: &'a MarketParams,
    product: &'a [f64],
    direct: &'a [f64],
    /// Boundary values `B_0..=B_anchor`, all known.
    known: &'a [f64],
}

impl Row<'_> {
    /// Value at grid index `j`; indices past the last known node are on the
    /// line from `B_anchor` to `x`.
    #[inline]
    fn value(&self, j: usize, x: f64) -> f64 {
        let anchor = self.known.len() - 1;
        if j <= anchor {
            self.known[j]
        } else {
            let frac = (j - anchor) as f64 / (self.i - anchor) as f64;
            self.known[anchor] + (x - self.known[anchor]) * frac
        }
    }

    fn residual(&self, x: f64) -> f64 {
        let p = self.p;
        let (k, r, q, s) = (p.strike, p.rate, p.dividend, p.vol);
        let t = self.i as f64 * self.h;
        let sst = s * t.sqrt();
        let d = d12_raw(x, t, k, p);
        let forcing =
            (k * (-r * t).exp() * norm_pdf(d.d2) - x * (-q * t).exp() * norm_pdf(d.d1)) / sst;

        if q == 0.0 {
            let mut sum = 0.0;
            for (j, &w) in self.product.iter().enumerate() {
                let u = (self.i - j) as f64 * self.h;
                sum += w * kernel_terms(x, self.value(j, x), u, p).rate_pdf;
            }
            x * norm_cdf_unchecked(d.d1) - forcing - r * k / s * sum
        } else {
            let mut prod = 0.0;
            let mut direct = 0.0;
            for (j, (&w, &om)) in self.product.iter().zip(self.direct).enumerate() {
                let u = (self.i - j) as f64 * self.h;
                let kt = kernel_terms(x, self.value(j, x), u, p);
                prod += w * (r * k * kt.rate_pdf - q * x * kt.div_pdf);
                direct += om * kt.div_cdf;
            }
            -x * (-q * t).exp() * norm_cdf_unchecked(d.d1) + forcing + prod / s - q * x * direct
        }
    }
}

struct NewtonOutcome {
    x: f64,
    residual: f64,
    iterations: usize,
    bisections: usize,
}

/// Scalar Newton with a central-difference derivative, falling back to
/// bisection when a sign-changing bracket is known and the Newton step
/// leaves it.
fn newton_solve<F: Fn(f64) -> f64>(
    f: F,
    guess: f64,
    bracket: (f64, f64),
    scale: f64,
    cfg: &SolverConfig,
    row: usize,
) -> Result<NewtonOutcome> {
    let tol = cfg.newton_tol * scale;
    let floor = 1e-10 * scale;
    let (mut lo, mut hi) = bracket;
    let (f_lo, f_hi) = (f(lo), f(hi));
    let bracketed = f_lo.is_finite() && f_hi.is_finite() && f_lo.signum() != f_hi.signum();
    let lo_sign = f_lo.signum();

    let mut x = guess.clamp(lo, hi);
    let mut fx = f(x);
    let mut bisections = 0;
    for it in 1..=cfg.newton_max_iter {
        if fx.abs() <= tol {
            return Ok(NewtonOutcome {
                x,
                residual: fx,
                iterations: it - 1,
                bisections,
            });
        }
        if bracketed {
            if fx.signum() == lo_sign {
                lo = x;
            } else {
                hi = x;
            }
        }
        let e = cfg.fd_rel_step * x.abs().max(1.0);
        let slope = (f(x + e) - f(x - e)) / (2.0 * e);
        let mut next = x - fx / slope;
        let outside = !(next > lo && next < hi);
        if !next.is_finite() || (bracketed && outside) {
            next = 0.5 * (lo + hi);
            bisections += 1;
        } else if next <= 0.0 {
            next = 0.5 * x;
        }
        let f_next = f(next);
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs() && f_next.abs() <= floor {
            return Ok(NewtonOutcome {
                x: next,
                residual: f_next,
                iterations: it,
                bisections,
            });
        }
        x = next;
        fx = f_next;
    }
    if fx.abs() <= tol {
        return Ok(NewtonOutcome {
            x,
            residual: fx,
            iterations: cfg.newton_max_iter,
            bisections,
        });
    }
    Err(Error::Solver {
        row,
        residual: fx,
        iterations: cfg.newton_max_iter,
    })
}

fn check_put_params(p: &MarketParams) -> Result<()> {
    p.validate()?;
    if p.rate <= 0.0 {
        return config("the put boundary needs r > 0 (with r = 0 early exercise is never optimal)");
    }
    Ok(())
}

/// Solves the discrete boundary equations row by row. Dispatches to the
/// hybrid scheme when `cfg.hybrid_m` is set.
pub fn solve_boundary(cfg: &SolverConfig, p: &MarketParams) -> Result<BoundaryCurve> {
    cfg.validate()?;
    check_put_params(p)?;
    let start = Instant::now();
    let tables = GridTables::build(cfg, p)?;
    let mut curve = solve_with_tables(cfg, p, &tables)?;
    curve.diagnostics.wall_time = start.elapsed().as_secs_f64();
    Ok(curve)
}

/// As [`solve_boundary`] but with weight tables from `cache`.
pub fn solve_boundary_cached(
    cfg: &SolverConfig,
    p: &MarketParams,
    cache: &TableCache,
) -> Result<BoundaryCurve> {
    cfg.validate()?;
    check_put_params(p)?;
    let start = Instant::now();
    let tables = cache.get(cfg, p)?;
    let mut curve = solve_with_tables(cfg, p, &tables)?;
    curve.diagnostics.wall_time = start.elapsed().as_secs_f64();
    Ok(curve)
}

/// Hybrid Newton-interpolation scheme `FH(d, m)` / `BFH(d, m)`: Newton on the
/// `n + 1` coarse nodes, `m - 2` linearly interpolated values in between, all
/// of which enter the quadrature sums of later rows.
pub fn solve_boundary_hybrid(cfg: &SolverConfig, p: &MarketParams) -> Result<BoundaryCurve> {
    if cfg.hybrid_m.is_none() {
        return config("solve_boundary_hybrid needs hybrid_m");
    }
    solve_boundary(cfg, p)
}

fn solve_with_tables(
    cfg: &SolverConfig,
    p: &MarketParams,
    tables: &GridTables,
) -> Result<BoundaryCurve> {
    let n = cfg.fine_intervals();
    if tables.n != n || tables.expiry != p.expiry {
        return config("weight tables were built for a different grid");
    }
    if p.dividend > 0.0 && !tables.has_direct() {
        return config("weight tables lack direct quadrature rows");
    }
    let stride = cfg.hybrid_m.unwrap_or(2) - 1;
    let h = p.expiry / n as f64;
    let b0 = initial_boundary(p);
    let lower = perpetual_lower_bound(p);

    let mut values = Vec::with_capacity(n + 1);
    values.push(b0);
    let mut diagnostics = Diagnostics::default();

    for c in 1..=cfg.n {
        let i = c * stride;
        let product = tables
            .product_row(i)
            .ok_or_else(|| Error::Config(format!("missing weight row {i}")))?;
        let row = Row {
            i,
            h,
            p,
            product,
            direct: tables.direct_row(i).unwrap_or(&[]),
            known: &values,
        };
        let guess = *values.last().expect("non-empty");
        let out = newton_solve(
            |x| row.residual(x),
            guess,
            (0.5 * lower, b0 * (1.0 + 1e-12)),
            p.strike,
            cfg,
            i,
        )?;
        if out.x < 0.9 * lower || out.x > 1.1 * b0 {
            diagnostics.warnings.push(format!(
                "row {i}: B = {} outside [{}, {}]",
                out.x,
                0.9 * lower,
                1.1 * b0
            ));
        }
        let anchor = values.len() - 1;
        let fill: Vec<f64> = (anchor + 1..i).map(|j| row.value(j, out.x)).collect();
        values.extend(fill);
        values.push(out.x);
        diagnostics.steps.push(StepDiagnostics {
            row: i,
            iterations: out.iterations,
            residual: out.residual,
            bisections: out.bisections,
        });
    }

    let basis = BaryBasis::equispaced(0.0, h, n, Family::FloaterHormann(cfg.d))?;
    Ok(BoundaryCurve {
        grid: Grid::new(n, p.expiry),
        values,
        basis,
        params: *p,
        config: *cfg,
        diagnostics,
    })
}

/// Recomputes the collocation residual of every Newton row of `curve` from
/// freshly built weight tables.
pub fn collocation_residuals(curve: &BoundaryCurve) -> Result<Vec<f64>> {
    let cfg = &curve.config;
    let p = &curve.params;
    let tables = GridTables::build(cfg, p)?;
    let stride = cfg.hybrid_m.unwrap_or(2) - 1;
    let h = curve.grid.spacing();
    (1..=cfg.n)
        .map(|c| {
            let i = c * stride;
            let row = Row {
                i,
                h,
                p,
                product: tables.product_row(i).expect("row built"),
                direct: tables.direct_row(i).unwrap_or(&[]),
                known: &curve.values[..=i - stride],
            };
            Ok(row.residual(curve.values[i]))
        })
        .collect()
}

/// Cross-check discretization of the two-dimensional Kim equation
/// `K - B(t) = p_E(t, B(t)) + int_0^t [rK e^{-r(t-s)} N(-d2) - delta B(t)
/// e^{-delta(t-s)} N(-d1)] ds` with the trapezoidal rule on `t_i = i T / n`.
/// The curve basis is linear (`FH(1)`).
pub fn solve_boundary_kim2d(n: usize, p: &MarketParams) -> Result<BoundaryCurve> {
    if n < 2 {
        return config(format!("kim2d needs n >= 2, got {n}"));
    }
    check_put_params(p)?;
    let start = Instant::now();
    let cfg = SolverConfig::new(n, 1);
    let h = p.expiry / n as f64;
    let (k, r, q) = (p.strike, p.rate, p.dividend);
    let b0 = initial_boundary(p);
    let lower = perpetual_lower_bound(p);
    let mut values = vec![b0];
    let mut diagnostics = Diagnostics::default();

    for i in 1..=n {
        let t = i as f64 * h;
        let known = &values;
        let g = |x: f64| {
            let mut sum = 0.0;
            for (j, &bj) in known.iter().enumerate() {
                let u = (i - j) as f64 * h;
                let d = d12_raw(x, u, bj, p);
                let term = r * k * (-r * u).exp() * norm_cdf_unchecked(-d.d2)
                    - q * x * (-q * u).exp() * norm_cdf_unchecked(-d.d1);
                sum += if j == 0 { 0.5 * term } else { term };
            }
            // s = t_i endpoint: N(-d) -> 1/2
            sum += 0.25 * (r * k - q * x);
            let euro = european_put(t, x, p).unwrap_or(f64::NAN);
            k - x - euro - h * sum
        };
        let guess = *values.last().expect("non-empty");
        let out = newton_solve(g, guess, (0.5 * lower, b0 * (1.0 + 1e-12)), k, &cfg, i)?;
        values.push(out.x);
        diagnostics.steps.push(StepDiagnostics {
            row: i,
            iterations: out.iterations,
            residual: out.residual,
            bisections: out.bisections,
        });
    }
    diagnostics.wall_time = start.elapsed().as_secs_f64();
    Ok(BoundaryCurve {
        grid: Grid::new(n, p.expiry),
        basis: BaryBasis::equispaced(0.0, h, n, Family::FloaterHormann(1))?,
        values,
        params: *p,
        config: cfg,
        diagnostics,
    })
}
