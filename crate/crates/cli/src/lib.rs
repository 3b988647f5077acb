//! Experiment drivers behind the `kimvolterra` binary.
//!
//! Every command turns a [`RunSpec`] into a [`Report`]: a header, rows of
//! typed cells and a pass flag for the tolerances embedded in the command.
//! Reports render to CSV or JSON.

use std::fmt;
use std::time::Instant;

use clap::ValueEnum;
use kimvolterra_core::{
    american_put_price, binomial_american_put, initial_boundary, lebesgue_constant, solve_boundary,
    BaryBasis, BoundaryCurve, Error as CoreError, Exec, Family, MarketParams, Scheme, SolverConfig,
};
use serde::Serialize;
use serde_json::{json, Map, Value};

/// Spots of the benchmark put grid.
pub const BENCHMARK_SPOTS: [f64; 5] = [80.0, 90.0, 100.0, 110.0, 120.0];
pub const BENCHMARK_TOL: f64 = 1e-3;
pub const BIN_STEPS: usize = 10_000;
pub const BOUNDARY_POINTS: usize = 200;
pub const SWEEP_DIVIDENDS: [f64; 4] = [0.0, 0.04, 0.08, 0.12];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Boundary,
    Price,
    Table3,
    Convergence,
    Lebesgue,
    Workprecision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Fh,
    Bfh,
}

impl From<FamilyArg> for Scheme {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Fh => Scheme::Fh,
            FamilyArg::Bfh => Scheme::Bfh,
        }
    }
}

/// Fully resolved description of one run. Identical specs give identical
/// output bytes, apart from wall-time columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    pub command: Command,
    pub params: MarketParams,
    /// Dividend yields swept by `boundary`; `params.dividend` elsewhere.
    pub dividends: Vec<f64>,
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub m: Option<usize>,
    pub families: Vec<FamilyArg>,
    pub spots: Vec<f64>,
    pub format: Format,
}

/// Raw flag values; `None` means "command default".
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub strike: Option<f64>,
    pub expiry: Option<f64>,
    pub rate: Option<f64>,
    pub dividend: Option<f64>,
    pub vol: Option<f64>,
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub family: Option<FamilyArg>,
    pub m: Option<usize>,
    pub spots: Vec<f64>,
    pub format: Format,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Solver(String),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Solver(msg) => write!(f, "solver failure: {msg}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
        }
    }

    fn from_core(e: CoreError, context: &str) -> Self {
        match e {
            CoreError::Solver { .. } => CliError::Solver(format!("{context}: {e}")),
            _ => CliError::Usage(format!("{context}: {e}")),
        }
    }
}

impl RunSpec {
    pub fn resolve(command: Command, o: &Overrides) -> Result<Self, CliError> {
        let params = MarketParams::new(
            o.strike.unwrap_or(100.0),
            o.expiry.unwrap_or(3.0),
            o.rate.unwrap_or(0.08),
            o.dividend.unwrap_or(0.08),
            o.vol.unwrap_or(0.2),
        )
        .map_err(|e| CliError::Usage(e.to_string()))?;
        let dividends = match (command, o.dividend) {
            (Command::Boundary, None) => SWEEP_DIVIDENDS.to_vec(),
            _ => vec![params.dividend],
        };
        let or = |given: &[usize], default: &[usize]| {
            if given.is_empty() {
                default.to_vec()
            } else {
                given.to_vec()
            }
        };
        let (n, d) = match command {
            Command::Boundary => (or(&o.n, &[128]), or(&o.d, &[3])),
            Command::Price | Command::Table3 => (or(&o.n, &[32]), or(&o.d, &[2])),
            Command::Convergence => (or(&o.n, &[16, 32, 64, 128]), or(&o.d, &[1, 2, 3])),
            Command::Lebesgue => (
                or(&o.n, &(8..=256).collect::<Vec<_>>()),
                or(&o.d, &[1, 2, 3]),
            ),
            Command::Workprecision => (or(&o.n, &[8, 16, 32, 64, 128]), or(&o.d, &[2, 3])),
        };
        let single = matches!(
            command,
            Command::Boundary | Command::Price | Command::Table3
        );
        if single && (n.len() != 1 || d.len() != 1) {
            return Err(CliError::Usage(format!(
                "{command:?} takes a single --n and --d"
            )));
        }
        if n.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Usage(
                "--n list must be strictly ascending".into(),
            ));
        }
        if d.contains(&0) && command != Command::Lebesgue {
            return Err(CliError::Usage("--d must be at least 1".into()));
        }
        let m = match command {
            Command::Workprecision => Some(o.m.unwrap_or(3)),
            _ => o.m,
        };
        if let Some(m) = m {
            if m < 2 {
                return Err(CliError::Usage(format!("--m must be at least 2, got {m}")));
            }
        }
        let families = match (command, o.family) {
            (_, Some(f)) => vec![f],
            (Command::Workprecision, None) => vec![FamilyArg::Fh, FamilyArg::Bfh],
            (_, None) => vec![FamilyArg::Fh],
        };
        let spots = if !o.spots.is_empty() {
            o.spots.clone()
        } else {
            match command {
                Command::Workprecision => vec![120.0],
                Command::Price => vec![100.0],
                _ => BENCHMARK_SPOTS.to_vec(),
            }
        };
        if spots.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(CliError::Usage("spots must be positive".into()));
        }
        Ok(RunSpec {
            command,
            params,
            dividends,
            n,
            d,
            m,
            families,
            spots,
            format: o.format,
        })
    }

    fn config(&self, n: usize, d: usize, family: FamilyArg) -> SolverConfig {
        let mut cfg = SolverConfig::new(n, d).with_scheme(family.into());
        cfg.hybrid_m = self.m;
        cfg
    }
}

/// One output cell. The variant fixes the text format.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(usize),
    /// Prices and boundary values: 4 decimals.
    Price(f64),
    /// Errors: scientific notation, 2 significant digits.
    Error(f64),
    /// Plain quantities: 6 decimals.
    Num(f64),
    Text(String),
    Flag(bool),
    /// Not applicable: empty in CSV, `null` in JSON.
    Empty,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Price(v) => write!(f, "{v:.4}"),
            Cell::Error(v) => write!(f, "{v:.1e}"),
            Cell::Num(v) => write!(f, "{v:.6}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Flag(b) => write!(f, "{b}"),
            Cell::Empty => Ok(()),
        }
    }
}

impl Cell {
    fn to_json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Price(v) | Cell::Error(v) | Cell::Num(v) => {
                if v.is_finite() {
                    json!(v)
                } else {
                    Value::Null
                }
            }
            Cell::Text(s) => json!(s),
            Cell::Flag(b) => json!(b),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub passed: bool,
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_string))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    pub fn to_json(&self, spec: &RunSpec) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .header
                    .iter()
                    .zip(row)
                    .map(|(h, c)| (h.to_string(), c.to_json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let doc = json!({ "spec": spec, "rows": rows, "passed": self.passed });
        let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn render(&self, spec: &RunSpec) -> String {
        match spec.format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(spec),
        }
    }

    /// Column index by header name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }
}

pub fn run(spec: &RunSpec) -> Result<Report, CliError> {
    match spec.command {
        Command::Boundary => cmd_boundary(spec),
        Command::Price => cmd_price(spec),
        Command::Table3 => cmd_table3(spec),
        Command::Convergence => cmd_convergence(spec),
        Command::Lebesgue => cmd_lebesgue(spec),
        Command::Workprecision => cmd_workprecision(spec),
    }
}

fn solve(cfg: &SolverConfig, p: &MarketParams, context: &str) -> Result<BoundaryCurve, CliError> {
    solve_boundary(cfg, p).map_err(|e| CliError::from_core(e, context))
}

pub fn cmd_boundary(spec: &RunSpec) -> Result<Report, CliError> {
    let (n, d) = (spec.n[0], spec.d[0]);
    let cfg = spec.config(n, d, spec.families[0]);
    let curves = Exec::Parallel.map(spec.dividends.clone(), |q| {
        let p = MarketParams {
            dividend: q,
            ..spec.params
        };
        solve(&cfg, &p, &format!("delta = {q}")).map(|c| (p, c))
    });
    let mut rows = Vec::new();
    let mut passed = true;
    let t_max = spec.params.expiry;
    for res in curves {
        let (p, curve) = res?;
        let slack = 1e-9 * p.strike;
        passed &= curve.values.windows(2).all(|w| w[1] <= w[0] + slack);
        passed &= (curve.values[0] - initial_boundary(&p)).abs() <= 1e-2;
        let mut prev = f64::INFINITY;
        for k in 0..BOUNDARY_POINTS {
            let t = t_max * k as f64 / (BOUNDARY_POINTS - 1) as f64;
            let b = curve
                .eval(t)
                .map_err(|e| CliError::from_core(e, "evaluating boundary"))?;
            passed &= b <= prev + slack;
            prev = b;
            rows.push(vec![Cell::Num(p.dividend), Cell::Num(t), Cell::Price(b)]);
        }
    }
    Ok(Report {
        header: vec!["dividend", "t", "boundary"],
        rows,
        passed,
    })
}

pub fn cmd_price(spec: &RunSpec) -> Result<Report, CliError> {
    let (n, d) = (spec.n[0], spec.d[0]);
    let cfg = spec.config(n, d, spec.families[0]);
    let p = spec.params;
    let curve = solve(&cfg, &p, "price")?;
    let results = Exec::Parallel.map(spec.spots.clone(), |s| {
        american_put_price(p.expiry, s, &curve, d)
            .map(|r| (s, r))
            .map_err(|e| CliError::from_core(e, &format!("S = {s}")))
    });
    let mut rows = Vec::new();
    let mut passed = true;
    for res in results {
        let (s, r) = res?;
        passed &= r.premium_part >= -1e-9 && r.value >= (p.strike - s).max(0.0) - 1e-6;
        rows.push(vec![
            Cell::Text(cfg.label()),
            Cell::Int(n),
            Cell::Price(s),
            Cell::Price(r.value),
            Cell::Price(r.european_part),
            Cell::Price(r.premium_part),
            r.bound_factor.map_or(Cell::Empty, Cell::Num),
        ]);
    }
    Ok(Report {
        header: vec![
            "method",
            "n",
            "S",
            "price",
            "european",
            "premium",
            "bound_factor",
        ],
        rows,
        passed,
    })
}

pub fn cmd_table3(spec: &RunSpec) -> Result<Report, CliError> {
    let (n, d) = (spec.n[0], spec.d[0]);
    let cfg = spec.config(n, d, spec.families[0]);
    let p = spec.params;
    let curve = solve(&cfg, &p, "table3")?;
    let cells = Exec::Parallel.map(spec.spots.clone(), |s| {
        let bin = binomial_american_put(BIN_STEPS, s, &p)
            .map_err(|e| CliError::from_core(e, &format!("BIN at S = {s}")))?;
        let price = american_put_price(p.expiry, s, &curve, d)
            .map_err(|e| CliError::from_core(e, &format!("S = {s}")))?;
        Ok::<_, CliError>((s, bin, price.value))
    });
    let mut rows = Vec::new();
    let mut passed = true;
    for cell in cells {
        let (s, bin, price) = cell?;
        let err = (price - bin).abs();
        passed &= err <= BENCHMARK_TOL;
        rows.push(vec![
            Cell::Price(s),
            Cell::Price(bin),
            Cell::Text(cfg.label()),
            Cell::Price(price),
            Cell::Error(err),
        ]);
    }
    Ok(Report {
        header: vec!["S", "BIN", "method", "price", "abs_error"],
        rows,
        passed,
    })
}

fn interpolation_error(n: usize, d: usize) -> Result<f64, CliError> {
    let basis = BaryBasis::equispaced(0.0, 1.0 / n as f64, n, Family::FloaterHormann(d))
        .map_err(|e| CliError::from_core(e, "interpolation study"))?;
    let values: Vec<f64> = basis.nodes().iter().map(|t| t.exp()).collect();
    let samples = 20 * n;
    Ok((0..samples)
        .map(|k| {
            let t = (k as f64 + 0.5) / samples as f64;
            (basis.eval(&values, t).unwrap_or(f64::NAN) - t.exp()).abs()
        })
        .fold(0.0, f64::max))
}

/// Interpolation order of `FH(d)` on `e^t` over `[0, 1]`, and shared-node
/// self-convergence of the boundary solver between `n` and `2n`.
pub fn cmd_convergence(spec: &RunSpec) -> Result<Report, CliError> {
    let mut rows = Vec::new();
    let mut passed = true;
    for &d in &spec.d {
        let mut prev: Option<(usize, f64)> = None;
        for &n in &spec.n {
            if n < d + 1 {
                continue;
            }
            let err = interpolation_error(n, d)?;
            let order = prev.map(|(pn, pe)| (pe / err).ln() / (n as f64 / pn as f64).ln());
            if let Some(o) = order {
                passed &= o >= d as f64 + 0.5;
            }
            rows.push(vec![
                Cell::Text("interpolation".into()),
                Cell::Text(format!("FH({d})")),
                Cell::Int(n),
                Cell::Error(err),
                order.map_or(Cell::Empty, Cell::Num),
            ]);
            prev = Some((n, err));
        }
    }
    let p = spec.params;
    for &family in &spec.families {
        for &d in &spec.d {
            let ns: Vec<usize> = spec.n.iter().copied().filter(|&n| n > d).collect();
            let mut grids: Vec<usize> = ns.clone();
            grids.extend(ns.iter().map(|&n| 2 * n));
            grids.sort_unstable();
            grids.dedup();
            let solved = Exec::Parallel.map(grids.clone(), |n| {
                let cfg = SolverConfig::new(n, d).with_scheme(family.into());
                solve(&cfg, &p, &format!("n = {n}"))
            });
            let mut curves = std::collections::BTreeMap::new();
            for (n, c) in grids.into_iter().zip(solved) {
                curves.insert(n, c?);
            }
            let mut prev: Option<f64> = None;
            for &n in &ns {
                let (a, b) = (&curves[&n], &curves[&(2 * n)]);
                let gap = (0..=n)
                    .filter(|&i| a.grid.node(i) >= p.expiry / 8.0)
                    .map(|i| (a.values[i] - b.values[2 * i]).abs())
                    .fold(0.0, f64::max);
                let order = prev.map(|pg| (pg / gap).log2());
                if let Some(pg) = prev {
                    passed &= gap < pg;
                }
                rows.push(vec![
                    Cell::Text("boundary".into()),
                    Cell::Text(a.config.label()),
                    Cell::Int(n),
                    Cell::Error(gap),
                    order.map_or(Cell::Empty, Cell::Num),
                ]);
                prev = Some(gap);
            }
        }
    }
    Ok(Report {
        header: vec!["study", "method", "n", "error", "order"],
        rows,
        passed,
    })
}

/// Sampled Lebesgue constants of `FH(d)` against `2^{d-1} (2 + ln n)`.
pub fn cmd_lebesgue(spec: &RunSpec) -> Result<Report, CliError> {
    let mut cells = Vec::new();
    for &d in &spec.d {
        for &n in &spec.n {
            if n >= d {
                cells.push((d, n));
            }
        }
    }
    let results = Exec::Parallel.map(cells, |(d, n)| {
        let basis = BaryBasis::equispaced(0.0, 1.0, n, Family::FloaterHormann(d))
            .map_err(|e| CliError::from_core(e, "lebesgue"))?;
        let lambda = lebesgue_constant(&basis, 16);
        let bound = 2f64.powi(d as i32 - 1) * (2.0 + (n as f64).ln());
        Ok::<_, CliError>((d, n, lambda, bound))
    });
    let mut rows = Vec::new();
    let mut passed = true;
    for res in results {
        let (d, n, lambda, bound) = res?;
        let ok = lambda <= bound;
        passed &= ok;
        rows.push(vec![
            Cell::Int(d),
            Cell::Int(n),
            Cell::Num(lambda),
            Cell::Num(bound),
            Cell::Flag(ok),
        ]);
    }
    Ok(Report {
        header: vec!["d", "n", "lebesgue", "bound", "within_bound"],
        rows,
        passed,
    })
}

/// Wall time and absolute error against `BIN(10000)` per method and grid.
/// Hybrid rows use `n / (m - 1)` coarse intervals, so every row with the
/// same `n` has the same total node count. Cells run one at a time to keep
/// the timings clean.
pub fn cmd_workprecision(spec: &RunSpec) -> Result<Report, CliError> {
    let p = spec.params;
    let s = spec.spots[0];
    let bin = binomial_american_put(BIN_STEPS, s, &p)
        .map_err(|e| CliError::from_core(e, "BIN reference"))?;
    let m = spec.m.unwrap_or(3);
    let mut rows = Vec::new();
    let mut passed = true;
    for &family in &spec.families {
        for &d in &spec.d {
            for &n in &spec.n {
                let mut cfgs = vec![SolverConfig::new(n, d).with_scheme(family.into())];
                if m > 2 && n % (m - 1) == 0 && n / (m - 1) > d {
                    cfgs.push(
                        SolverConfig::new(n / (m - 1), d)
                            .with_scheme(family.into())
                            .with_hybrid(m),
                    );
                }
                for cfg in cfgs {
                    if cfg.validate().is_err() {
                        continue;
                    }
                    let start = Instant::now();
                    let priced = solve_boundary(&cfg, &p)
                        .and_then(|c| american_put_price(p.expiry, s, &c, d));
                    let secs = start.elapsed().as_secs_f64();
                    let (price, err) = match priced {
                        Ok(r) => (Cell::Price(r.value), Cell::Error((r.value - bin).abs())),
                        Err(_) => {
                            passed = false;
                            (Cell::Text("failed".into()), Cell::Text("failed".into()))
                        }
                    };
                    rows.push(vec![
                        Cell::Text(cfg.label()),
                        Cell::Int(n),
                        Cell::Int(cfg.total_nodes()),
                        Cell::Num(secs),
                        price,
                        err,
                    ]);
                }
            }
        }
    }
    Ok(Report {
        header: vec![
            "method",
            "n",
            "total_nodes",
            "wall_time",
            "price",
            "abs_error",
        ],
        rows,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_formats() {
        assert_eq!(Cell::Price(22.20497).to_string(), "22.2050");
        assert_eq!(Cell::Error(3.68e-4).to_string(), "3.7e-4");
        assert_eq!(Cell::Error(1.0e-5).to_string(), "1.0e-5");
        assert_eq!(Cell::Num(0.5).to_string(), "0.500000");
        assert_eq!(Cell::Empty.to_string(), "");
        assert_eq!(Cell::Empty.to_json(), Value::Null);
        assert_eq!(Cell::Num(f64::NAN).to_json(), Value::Null);
    }

    #[test]
    fn exit_codes() {
        let solver = CoreError::Solver {
            row: 3,
            residual: 1.0,
            iterations: 50,
        };
        assert_eq!(CliError::from_core(solver, "S = 80").exit_code(), 3);
        let config = CoreError::Config("bad".into());
        assert_eq!(CliError::from_core(config, "x").exit_code(), 2);
    }

    #[test]
    fn resolve_defaults() {
        let spec = RunSpec::resolve(Command::Boundary, &Overrides::default()).unwrap();
        assert_eq!(spec.dividends, SWEEP_DIVIDENDS.to_vec());
        let spec = RunSpec::resolve(Command::Table3, &Overrides::default()).unwrap();
        assert_eq!((spec.n.clone(), spec.d.clone()), (vec![32], vec![2]));
        assert_eq!(spec.spots, BENCHMARK_SPOTS.to_vec());
        let o = Overrides {
            n: vec![32, 16],
            ..Overrides::default()
        };
        assert!(matches!(
            RunSpec::resolve(Command::Convergence, &o),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let r = Report {
            header: vec!["a", "b"],
            rows: vec![vec![Cell::Int(1), Cell::Text("x".into())]],
            passed: true,
        };
        assert_eq!(r.to_csv(), "a,b\n1,x\n");
        let r = Report {
            header: vec!["method"],
            rows: vec![vec![Cell::Text("FH(2,3)".into())]],
            passed: true,
        };
        assert_eq!(r.to_csv(), "method\n\"FH(2,3)\"\n");
    }
}
