use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kimvolterra::{run, CliError, Command, FamilyArg, Format, Overrides, RunSpec};

/// Early exercise boundary experiments: benchmark prices, boundary curves,
/// convergence, Lebesgue constants and work-precision scans.
#[derive(Parser, Debug)]
#[command(name = "kimvolterra", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Boundary curves on 200 points, one block per dividend yield
    Boundary,
    /// American put prices at t = T for the given spots
    Price,
    /// Benchmark puts: binomial reference against the product-integration price
    Table3,
    /// Interpolation orders and boundary self-convergence
    Convergence,
    /// Sampled Lebesgue constants against 2^(d-1) (2 + ln n)
    Lebesgue,
    /// Wall time and error per method and grid size
    Workprecision,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Boundary => Command::Boundary,
            Sub::Price => Command::Price,
            Sub::Table3 => Command::Table3,
            Sub::Convergence => Command::Convergence,
            Sub::Lebesgue => Command::Lebesgue,
            Sub::Workprecision => Command::Workprecision,
        }
    }
}

#[derive(Args, Debug)]
struct Opts {
    #[arg(long, global = true, allow_hyphen_values = true)]
    strike: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    expiry: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    rate: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    dividend: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    vol: Option<f64>,
    /// Grid intervals; a comma list for scans
    #[arg(long, global = true, value_delimiter = ',')]
    n: Vec<usize>,
    /// Floater-Hormann order; a comma list for scans
    #[arg(long, global = true, value_delimiter = ',')]
    d: Vec<usize>,
    #[arg(long, global = true, value_enum)]
    family: Option<FamilyArg>,
    /// Hybrid Newton-interpolation parameter
    #[arg(long, global = true)]
    m: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    spots: Vec<f64>,
    /// Output file; stdout when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let o = &cli.opts;
    let overrides = Overrides {
        strike: o.strike,
        expiry: o.expiry,
        rate: o.rate,
        dividend: o.dividend,
        vol: o.vol,
        n: o.n.clone(),
        d: o.d.clone(),
        family: o.family,
        m: o.m,
        spots: o.spots.clone(),
        format: o.format,
    };
    let spec = RunSpec::resolve(cli.command.into(), &overrides)?;
    let report = run(&spec)?;
    let text = report.render(&spec);
    match &o.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("tolerance check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
