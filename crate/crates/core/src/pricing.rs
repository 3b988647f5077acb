//! American option prices from a solved boundary through the early exercise
//! premium representation
//!
//! ```text
//! P(t, S) = p_E(t, S) + int_0^t rK e^{-r(t-xi)} N(-d2(S, t-xi, B(xi))) dxi
//!                     - int_0^t delta S e^{-delta(t-xi)} N(-d1(S, t-xi, B(xi))) dxi
//! ```
//!
//! with both integrals replaced by barycentric rational quadrature on an
//! equispaced grid of `[0, t]`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::barycentric::{BaryBasis, Family};
use crate::boundary::{perpetual_theta, solve_boundary, BoundaryCurve, SolverConfig};
use crate::error::{domain, Result};
use crate::market::{d12_raw, european_call, european_put, norm_cdf_unchecked, MarketParams};
use crate::quadrature::brq_weights_with;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceResult {
    pub value: f64,
    pub european_part: f64,
    pub premium_part: f64,
    /// Multiplier of the boundary error in the price error bound; `None`
    /// when `r = 0`.
    pub bound_factor: Option<f64>,
    pub wall_time: f64,
}

/// `(theta - 1) / (sigma theta sqrt 2) * (sqrt(delta) S / K + sqrt(r))`.
///
/// Returns `None` for `r = 0`, where `theta` is undefined.
pub fn error_bound_factor(s: f64, p: &MarketParams) -> Option<f64> {
    let theta = perpetual_theta(p)?;
    Some(
        (theta - 1.0) / (p.vol * theta * std::f64::consts::SQRT_2)
            * (p.dividend.sqrt() * s / p.strike + p.rate.sqrt()),
    )
}

/// American put at time-to-expiry `t` and spot `s`, integrating the premium
/// with `FH(quad_d)` quadrature weights on `n + 1` equispaced points of
/// `[0, t]` (`n` the curve's interval count).
///
/// In the exercise region `s <= B(t)` the value is the payoff `K - s`.
pub fn american_put_price(
    t: f64,
    s: f64,
    curve: &BoundaryCurve,
    quad_d: usize,
) -> Result<PriceResult> {
    let start = Instant::now();
    let t = check_point(t, s, curve)?;
    let b_t = curve.eval(t)?;
    if s <= b_t {
        let p = &curve.params;
        let european = european_put(t, s, p)?;
        let value = p.strike - s;
        return Ok(PriceResult {
            value,
            european_part: european,
            premium_part: value - european,
            bound_factor: error_bound_factor(s, p),
            wall_time: start.elapsed().as_secs_f64(),
        });
    }
    let mut res = premium_representation(t, s, curve, quad_d)?;
    res.wall_time = start.elapsed().as_secs_f64();
    Ok(res)
}

/// The premium representation itself, evaluated on either side of the
/// boundary. The `xi = t` summand takes its limit `N(-d) -> 1{s < B(t)}`,
/// and `1/2` when `s = B(t)` to relative precision `1e-12`.
pub fn premium_representation(
    t: f64,
    s: f64,
    curve: &BoundaryCurve,
    quad_d: usize,
) -> Result<PriceResult> {
    let start = Instant::now();
    let t = check_point(t, s, curve)?;
    let p = &curve.params;
    let european = european_put(t, s, p)?;
    let b_t = curve.eval(t)?;

    let n = curve.grid.n;
    let h = t / n as f64;
    let basis = BaryBasis::equispaced(0.0, h, n, Family::FloaterHormann(quad_d.min(n)))?;
    let omega = brq_weights_with(&basis, 0.0, t, curve.config.panel_points)?.weights;

    let (k, r, q) = (p.strike, p.rate, p.dividend);
    let mut premium = 0.0;
    for (i, &w) in omega.iter().enumerate().take(n) {
        let xi = basis.nodes()[i];
        let u = t - xi;
        let b = curve.eval(xi)?;
        let d = d12_raw(s, u, b, p);
        premium += w
            * (r * k * (-r * u).exp() * norm_cdf_unchecked(-d.d2)
                - q * s * (-q * u).exp() * norm_cdf_unchecked(-d.d1));
    }
    let limit = if (s - b_t).abs() <= 1e-12 * b_t {
        0.5
    } else if s < b_t {
        1.0
    } else {
        0.0
    };
    premium += omega[n] * limit * (r * k - q * s);

    Ok(PriceResult {
        value: european + premium,
        european_part: european,
        premium_part: premium,
        bound_factor: error_bound_factor(s, p),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn check_point(t: f64, s: f64, curve: &BoundaryCurve) -> Result<f64> {
    let expiry = curve.expiry();
    if !(t > 0.0 && t <= expiry * (1.0 + 1e-12)) {
        return domain(format!(
            "t = {t} outside (0, {expiry}] covered by the curve"
        ));
    }
    if !(s > 0.0) || !s.is_finite() {
        return domain(format!("spot must be positive, got {s}"));
    }
    Ok(t.min(expiry))
}

/// American call by put-call symmetry: `C(S; K, r, delta) = P(K; S, delta, r)`.
/// Solves the boundary of the symmetric put with `cfg`.
pub fn american_call_price(
    t: f64,
    s: f64,
    p: &MarketParams,
    cfg: &SolverConfig,
) -> Result<PriceResult> {
    p.validate()?;
    if !(s > 0.0) || !s.is_finite() {
        return domain(format!("spot must be positive, got {s}"));
    }
    if !(t > 0.0 && t <= p.expiry * (1.0 + 1e-12)) {
        return domain(format!("t = {t} outside (0, {}]", p.expiry));
    }
    let start = Instant::now();
    if p.dividend == 0.0 {
        // symmetric put has zero rate: no early exercise
        let value = european_call(t, s, p)?;
        return Ok(PriceResult {
            value,
            european_part: value,
            premium_part: 0.0,
            bound_factor: None,
            wall_time: start.elapsed().as_secs_f64(),
        });
    }
    let sym = MarketParams {
        expiry: t,
        ..p.call_symmetric(s)
    };
    let curve = solve_boundary(cfg, &sym)?;
    let mut res = american_put_price(t, p.strike, &curve, cfg.d)?;
    res.wall_time = start.elapsed().as_secs_f64();
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Scheme;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn benchmark() -> MarketParams {
        MarketParams::new(100.0, 3.0, 0.08, 0.08, 0.2).unwrap()
    }

    fn curve(n: usize, d: usize) -> BoundaryCurve {
        solve_boundary(&SolverConfig::new(n, d), &benchmark()).unwrap()
    }

    /// CRR tree for the American call, continuous dividend in the drift.
    fn binomial_american_call(steps: usize, s: f64, p: &MarketParams) -> f64 {
        let dt = p.expiry / steps as f64;
        let u = (p.vol * dt.sqrt()).exp();
        let disc = (-p.rate * dt).exp();
        let q = (((p.rate - p.dividend) * dt).exp() - 1.0 / u) / (u - 1.0 / u);
        let mut v: Vec<f64> = (0..=steps)
            .map(|k| (s * u.powi(2 * k as i32 - steps as i32) - p.strike).max(0.0))
            .collect();
        for step in (0..steps).rev() {
            for k in 0..=step {
                let cont = disc * (q * v[k + 1] + (1.0 - q) * v[k]);
                let spot = s * u.powi(2 * k as i32 - step as i32);
                v[k] = cont.max(spot - p.strike);
            }
        }
        v[0]
    }

    #[test]
    fn benchmark_points() {
        let c = curve(32, 2);
        let p80 = american_put_price(3.0, 80.0, &c, 2).unwrap();
        assert!((p80.value - 22.2050).abs() <= 5e-4, "{}", p80.value);
        let p100 = american_put_price(3.0, 100.0, &c, 2).unwrap();
        assert!((p100.value - 11.7037).abs() <= 1e-3, "{}", p100.value);
    }

    #[test]
    fn deep_out_of_the_money_vanishes() {
        let p = MarketParams::new(100.0, 3.0, 0.08, 0.0, 0.2).unwrap();
        let c = solve_boundary(&SolverConfig::new(16, 2), &p).unwrap();
        let res = american_put_price(3.0, 1e5, &c, 2).unwrap();
        assert!(res.value.abs() < 1e-12, "{}", res.value);
    }

    #[test]
    fn decomposition_and_dominance() {
        let c = curve(32, 3);
        let mut prev = f64::INFINITY;
        for k in 0..=40 {
            let s = 60.0 + 2.0 * k as f64;
            let res = american_put_price(3.0, s, &c, 3).unwrap();
            assert_eq!(res.value, res.european_part + res.premium_part);
            assert!(res.premium_part >= -1e-12);
            assert!(res.value >= (100.0 - s).max(0.0) - 1e-9);
            assert!(res.value >= res.european_part);
            assert!(res.value <= 100.0);
            assert!(res.value < prev);
            prev = res.value;
        }
    }

    #[test]
    fn exercise_region_is_intrinsic() {
        let c = curve(16, 2);
        let b = c.eval(1.5).unwrap();
        let res = american_put_price(1.5, 0.9 * b, &c, 2).unwrap();
        assert_eq!(res.value, 100.0 - 0.9 * b);
    }

    #[test]
    fn value_matching_at_boundary() {
        let c = curve(64, 3);
        let b = c.eval(3.0).unwrap();
        assert_eq!(american_put_price(3.0, b, &c, 3).unwrap().value, 100.0 - b);
        let res = premium_representation(3.0, b, &c, 3).unwrap();
        assert!(
            (res.value - (100.0 - b)).abs() <= 1e-2,
            "{} vs {}",
            res.value,
            100.0 - b
        );
    }

    #[test]
    fn representation_agrees_with_price_off_boundary() {
        let c = curve(32, 2);
        for s in [80.0, 100.0, 120.0] {
            let a = american_put_price(3.0, s, &c, 2).unwrap();
            let b = premium_representation(3.0, s, &c, 2).unwrap();
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn refinement_settles() {
        let prices: Vec<f64> = [16, 32, 64, 128]
            .into_iter()
            .map(|n| {
                american_put_price(3.0, 100.0, &curve(n, 2), 2)
                    .unwrap()
                    .value
            })
            .collect();
        let diffs: Vec<f64> = prices.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
    }

    #[test]
    fn domain_errors() {
        let c = curve(16, 2);
        assert!(american_put_price(0.0, 100.0, &c, 2).is_err());
        assert!(american_put_price(3.5, 100.0, &c, 2).is_err());
        assert!(american_put_price(3.0, -1.0, &c, 2).is_err());
        assert!(american_put_price(3.0, f64::NAN, &c, 2).is_err());
    }

    #[test]
    fn bound_factor_values() {
        assert_relative_eq!(
            error_bound_factor(100.0, &benchmark()).unwrap(),
            3.280776406404415,
            max_relative = 1e-14
        );
        // delta = 0: theta = -4, factor = 5/(4 sqrt 2 sigma) sqrt(r)
        let p = MarketParams::new(100.0, 3.0, 0.08, 0.0, 0.2).unwrap();
        assert_relative_eq!(
            error_bound_factor(120.0, &p).unwrap(),
            1.25 / (0.2 * std::f64::consts::SQRT_2) * 0.08f64.sqrt(),
            max_relative = 1e-14
        );
        let zero_rate = MarketParams::new(100.0, 3.0, 0.0, 0.0, 0.2).unwrap();
        assert!(error_bound_factor(100.0, &zero_rate).is_none());
    }

    #[test]
    fn call_without_dividend_is_european() {
        let p = MarketParams::new(100.0, 1.0, 0.05, 0.0, 0.25).unwrap();
        let res = american_call_price(1.0, 105.0, &p, &SolverConfig::new(16, 2)).unwrap();
        assert_eq!(res.value, european_call(1.0, 105.0, &p).unwrap());
        assert_eq!(res.premium_part, 0.0);
    }

    #[test]
    fn call_put_symmetry() {
        let p = MarketParams::new(100.0, 1.0, 0.06, 0.06, 0.2).unwrap();
        let cfg = SolverConfig::new(32, 2);
        let call = american_call_price(1.0, 100.0, &p, &cfg).unwrap().value;
        let put_curve = solve_boundary(&cfg, &p).unwrap();
        let put = american_put_price(1.0, 100.0, &put_curve, 2).unwrap().value;
        assert!((call - put).abs() <= 1e-6, "{call} vs {put}");
    }

    #[test]
    fn call_matches_tree() {
        let p = MarketParams::new(100.0, 1.0, 0.04, 0.08, 0.2).unwrap();
        let cfg = SolverConfig::new(64, 2);
        let call = american_call_price(1.0, 110.0, &p, &cfg).unwrap().value;
        let tree = binomial_american_call(10_000, 110.0, &p);
        assert!((call - tree).abs() <= 2e-3, "{call} vs {tree}");
    }

    #[test]
    fn bfh_prices_benchmark() {
        let c = solve_boundary(
            &SolverConfig::new(32, 2).with_scheme(Scheme::Bfh),
            &benchmark(),
        )
        .unwrap();
        for (s, bin) in [(80.0, 22.2050), (100.0, 11.7037), (120.0, 5.9299)] {
            let v = american_put_price(3.0, s, &c, 2).unwrap().value;
            assert!((v - bin).abs() <= 1e-3, "S={s}: {v}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn bound_factor_positive(
            r in 0.005f64..0.15,
            q in 0.0f64..0.15,
            vol in 0.05f64..0.6,
            s in 10.0f64..300.0,
        ) {
            let p = MarketParams::new(100.0, 1.0, r, q, vol).unwrap();
            prop_assert!(error_bound_factor(s, &p).unwrap() > 0.0);
        }
    }
}
