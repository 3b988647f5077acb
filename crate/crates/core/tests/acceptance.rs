//! End-to-end acceptance checks. Each criterion prints one `PASS`/`FAIL`
//! line; the process exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use kimvolterra_core::{
    american_put_price, binomial_american_put, collocation_residuals, initial_boundary,
    lebesgue_constant, perpetual_lower_bound, perpetual_theta, premium_representation,
    product_weights, solve_boundary, BaryBasis, BoundaryCurve, Family, MarketParams, Scheme,
    SolverConfig,
};

const SPOTS: [f64; 5] = [80.0, 90.0, 100.0, 110.0, 120.0];
const REFERENCE_BIN: [f64; 5] = [22.2050, 16.2071, 11.7037, 8.3671, 5.9299];

const BIN_TOL: f64 = 5e-4;
const BIN_SECONDS: f64 = 60.0;
const METHOD_TOL: f64 = 1e-3;
const METHOD_TIGHT_TOL: f64 = 5e-4;
const METHOD_SECONDS: f64 = 30.0;
const B0_TOL: f64 = 1e-2;
const MONOTONE_SLACK: f64 = 1e-9;
const BRACKET_SLACK: f64 = 1e-6;
const ORDER_SECONDS: f64 = 5.0;
const LEBESGUE_SECONDS: f64 = 10.0;
const WEIGHT_SUM_TOL: f64 = 1e-10;
const MONOMIAL_TOL: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-10;
const VALUE_MATCH_TOL: f64 = 1e-2;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, passed: bool, detail: String) {
        if !passed {
            self.failures += 1;
        }
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id:>2} {name}: {detail}");
    }
}

fn benchmark(dividend: f64) -> MarketParams {
    MarketParams::new(100.0, 3.0, 0.08, dividend, 0.2).unwrap()
}

fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn bin_reproduction(rep: &mut Report) -> Vec<f64> {
    let p = benchmark(0.08);
    let start = Instant::now();
    let bin: Vec<f64> = SPOTS
        .iter()
        .map(|&s| binomial_american_put(10_000, s, &p).unwrap())
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let err = max_abs(bin.iter().zip(REFERENCE_BIN).map(|(a, b)| a - b));
    rep.line(
        1,
        "BIN reproduction",
        err <= BIN_TOL && secs < BIN_SECONDS,
        format!("max |BIN - table| = {err:.2e} (tol {BIN_TOL:.0e}), {secs:.2} s (limit {BIN_SECONDS} s)"),
    );
    bin
}

fn method_accuracy(rep: &mut Report, bin: &[f64]) {
    let p = benchmark(0.08);
    let mut any_pass = false;
    let mut details = Vec::new();
    for scheme in [Scheme::Fh, Scheme::Bfh] {
        let cfg = SolverConfig::new(32, 2).with_scheme(scheme);
        let start = Instant::now();
        let curve = solve_boundary(&cfg, &p).unwrap();
        let prices: Vec<f64> = SPOTS
            .iter()
            .map(|&s| american_put_price(3.0, s, &curve, 2).unwrap().value)
            .collect();
        let secs = start.elapsed().as_secs_f64();
        let err = max_abs(prices.iter().zip(bin).map(|(a, b)| a - b));
        any_pass |= err <= METHOD_TOL && secs < METHOD_SECONDS;
        details.push(format!(
            "{} max err {err:.2e} ({} 5e-4), {secs:.3} s",
            cfg.label(),
            if err <= METHOD_TIGHT_TOL {
                "within"
            } else {
                "above"
            }
        ));
    }
    rep.line(2, "method accuracy", any_pass, details.join("; "));
}

fn solved_curves() -> Vec<BoundaryCurve> {
    let mut curves = Vec::new();
    for dividend in [0.0, 0.04, 0.08, 0.12] {
        for (n, d, scheme, hybrid) in [
            (32, 2, Scheme::Fh, None),
            (64, 3, Scheme::Fh, None),
            (32, 2, Scheme::Bfh, None),
            (16, 3, Scheme::Fh, Some(4)),
        ] {
            let mut cfg = SolverConfig::new(n, d).with_scheme(scheme);
            cfg.hybrid_m = hybrid;
            curves.push(solve_boundary(&cfg, &benchmark(dividend)).unwrap());
        }
    }
    curves
}

fn boundary_limits(rep: &mut Report, curves: &[BoundaryCurve]) {
    let mut ok = true;
    let mut worst_rise: f64 = 0.0;
    for c in curves {
        let p = &c.params;
        let b0 = c.values[0];
        if p.dividend <= p.rate {
            ok &= b0 == p.strike;
        } else {
            ok &= (b0 - 66.67).abs() <= B0_TOL;
        }
        for w in c.values.windows(2) {
            worst_rise = worst_rise.max(w[1] - w[0]);
        }
    }
    ok &= worst_rise <= MONOTONE_SLACK * 100.0;
    let b0_high = initial_boundary(&benchmark(0.12));
    rep.line(
        3,
        "boundary limits",
        ok,
        format!(
            "{} curves, B(0) = 100 for delta <= r, B(0) = {b0_high:.4} for delta = 0.12, largest rise {worst_rise:.2e}",
            curves.len()
        ),
    );
}

fn perpetual_bracketing(rep: &mut Report, curves: &[BoundaryCurve]) {
    let mut ok = true;
    let mut tightest = f64::INFINITY;
    for c in curves {
        let lower = perpetual_lower_bound(&c.params);
        for &b in &c.values {
            ok &= b >= lower - BRACKET_SLACK && b <= c.values[0] + BRACKET_SLACK;
            tightest = tightest.min(b - lower);
        }
    }
    let zero_div = benchmark(0.0);
    let theta = perpetual_theta(&zero_div).unwrap();
    let bound = perpetual_lower_bound(&zero_div);
    ok &= (theta + 4.0).abs() <= 1e-14 && (bound - 80.0).abs() <= 1e-12;
    rep.line(
        4,
        "perpetual bracketing",
        ok,
        format!("min margin above lower bound {tightest:.3}, delta = 0: theta = {theta}, bound = {bound}"),
    );
}

fn interpolation_order(rep: &mut Report) {
    let start = Instant::now();
    let sup_error = |n: usize, d: usize| {
        let basis =
            BaryBasis::equispaced(0.0, 1.0 / n as f64, n, Family::FloaterHormann(d)).unwrap();
        let values: Vec<f64> = basis.nodes().iter().map(|t| t.exp()).collect();
        (0..20 * n)
            .map(|k| {
                let t = (k as f64 + 0.5) / (20 * n) as f64;
                (basis.eval(&values, t).unwrap() - t.exp()).abs()
            })
            .fold(0.0, f64::max)
    };
    let mut ok = true;
    let mut orders = Vec::new();
    for d in [1, 2, 3] {
        let order = (sup_error(32, d) / sup_error(256, d)).ln() / 8f64.ln();
        ok &= order >= d as f64 + 0.5;
        orders.push(format!("d={d}: {order:.2}"));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < ORDER_SECONDS;
    rep.line(
        5,
        "interpolation order",
        ok,
        format!("{}, {secs:.3} s", orders.join(", ")),
    );
}

fn lebesgue_bound(rep: &mut Report) {
    let start = Instant::now();
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    for d in 1..=3 {
        for n in 8..=256 {
            let basis = BaryBasis::equispaced(0.0, 1.0, n, Family::FloaterHormann(d)).unwrap();
            let lambda = lebesgue_constant(&basis, 16);
            let bound = 2f64.powi(d as i32 - 1) * (2.0 + (n as f64).ln());
            ok &= lambda <= bound;
            worst_ratio = worst_ratio.max(lambda / bound);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < LEBESGUE_SECONDS;
    rep.line(
        6,
        "Lebesgue bound",
        ok,
        format!("max Lambda/bound = {worst_ratio:.3} over 747 bases, {secs:.2} s"),
    );
}

fn weight_identities(rep: &mut Report) {
    let mut sum_err: f64 = 0.0;
    let mut mono_err: f64 = 0.0;
    for n in [8, 16, 32] {
        let h = 3.0 / n as f64;
        for family in [
            Family::FloaterHormann(1),
            Family::FloaterHormann(2),
            Family::FloaterHormann(3),
            Family::Berrut,
        ] {
            let basis = BaryBasis::equispaced(0.0, h, n, family).unwrap();
            for i in 1..=n {
                let t = i as f64 * h;
                let w = product_weights(i, &basis).unwrap();
                sum_err = sum_err.max((w.sum() - 2.0 * t.sqrt()).abs());
                let Family::FloaterHormann(d) = family else {
                    continue;
                };
                let mut beta = 2.0;
                for k in 0..=d.min(i) {
                    if k > 0 {
                        beta *= k as f64 / (k as f64 + 0.5);
                    }
                    let samples: Vec<f64> =
                        (0..=i).map(|j| (j as f64 * h).powi(k as i32)).collect();
                    let exact = t.powf(k as f64 + 0.5) * beta;
                    mono_err = mono_err.max((w.apply(&samples) - exact).abs());
                }
            }
        }
    }
    rep.line(
        7,
        "product-weight identities",
        sum_err <= WEIGHT_SUM_TOL && mono_err <= MONOMIAL_TOL,
        format!("max |sum w - 2 sqrt t| = {sum_err:.2e}, max monomial error = {mono_err:.2e}"),
    );
}

fn residual_certificate(rep: &mut Report, curves: &[BoundaryCurve]) {
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    for c in curves {
        let res = collocation_residuals(c).unwrap();
        rows += res.len();
        worst = worst.max(max_abs(res) / c.params.strike);
        worst = worst.max(c.diagnostics.max_residual() / c.params.strike);
    }
    rep.line(
        8,
        "residual certificate",
        worst <= RESIDUAL_TOL,
        format!("{rows} Newton rows, max |residual|/K = {worst:.2e}"),
    );
}

fn self_convergence(rep: &mut Report) {
    let p = benchmark(0.08);
    let mut ok = true;
    let mut details = Vec::new();
    for scheme in [Scheme::Fh, Scheme::Bfh] {
        for d in [1, 2] {
            let curves: Vec<BoundaryCurve> = [16, 32, 64, 128, 256]
                .into_iter()
                .map(|n| solve_boundary(&SolverConfig::new(n, d).with_scheme(scheme), &p).unwrap())
                .collect();
            let gaps: Vec<f64> = curves
                .windows(2)
                .map(|w| {
                    (0..=w[0].grid.n)
                        .filter(|&i| w[0].grid.node(i) >= p.expiry / 8.0)
                        .map(|i| (w[0].values[i] - w[1].values[2 * i]).abs())
                        .fold(0.0, f64::max)
                })
                .collect();
            ok &= gaps.windows(2).all(|g| g[1] < g[0]);
            let label = curves[0].config.label();
            details.push(format!(
                "{label} [{}]",
                gaps.iter()
                    .map(|g| format!("{g:.1e}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ));
        }
    }
    rep.line(9, "self-convergence", ok, details.join("; "));
}

fn value_matching(rep: &mut Report) {
    let curve = solve_boundary(&SolverConfig::new(64, 3), &benchmark(0.08)).unwrap();
    let b = curve.eval(3.0).unwrap();
    let payoff = 100.0 - b;
    let priced = (american_put_price(3.0, b, &curve, 3).unwrap().value - payoff).abs();
    let formula = (premium_representation(3.0, b, &curve, 3).unwrap().value - payoff).abs();
    rep.line(
        10,
        "value matching",
        priced <= VALUE_MATCH_TOL && formula <= VALUE_MATCH_TOL,
        format!(
            "B_n(T) = {b:.4}, price gap {priced:.2e}, premium representation gap {formula:.2e}"
        ),
    );
}

fn hybrid_speedup(rep: &mut Report) {
    let p = benchmark(0.08);
    let hybrid = SolverConfig::new(16, 3).with_hybrid(4);
    let plain = SolverConfig::new(48, 3);
    assert_eq!(hybrid.total_nodes(), plain.total_nodes());
    let time = |cfg: &SolverConfig| {
        let start = Instant::now();
        let curve = solve_boundary(cfg, &p).unwrap();
        (start.elapsed().as_secs_f64(), curve)
    };
    let (mut t_h, mut t_p) = (f64::INFINITY, f64::INFINITY);
    let mut curves = None;
    for _ in 0..7 {
        let (a, ch) = time(&hybrid);
        let (b, cp) = time(&plain);
        t_h = t_h.min(a);
        t_p = t_p.min(b);
        curves = Some((ch, cp));
    }
    let (ch, cp) = curves.unwrap();
    let price = |c: &BoundaryCurve| american_put_price(3.0, 120.0, c, 3).unwrap().value;
    let ratio = t_h / t_p;
    rep.line(
        11,
        "hybrid speedup",
        ratio < 1.0,
        format!(
            "N = {}: {} {:.2} ms vs {} {:.2} ms, ratio {ratio:.3}; P(S=120) {:.4} vs {:.4}",
            plain.total_nodes(),
            hybrid.label(),
            1e3 * t_h,
            plain.label(),
            1e3 * t_p,
            price(&ch),
            price(&cp)
        ),
    );
}

fn main() -> ExitCode {
    let mut rep = Report { failures: 0 };
    let bin = bin_reproduction(&mut rep);
    method_accuracy(&mut rep, &bin);
    let curves = solved_curves();
    boundary_limits(&mut rep, &curves);
    perpetual_bracketing(&mut rep, &curves);
    interpolation_order(&mut rep);
    lebesgue_bound(&mut rep);
    weight_identities(&mut rep);
    residual_certificate(&mut rep, &curves);
    self_convergence(&mut rep);
    value_matching(&mut rep);
    hybrid_speedup(&mut rep);
    println!("{} of 11 criteria passed", 11 - rep.failures);
    if rep.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
