//! Market parameters, Gaussian and Black-Scholes primitives, and the CRR
//! binomial American put used as ground truth.
//!
//! Throughout the crate `t` is time-to-expiry: `t = 0` is the expiry date.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{config, domain, Result};

/// `1 / sqrt(2 pi)`
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Black-Scholes market data with a continuous dividend yield.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub strike: f64,
    pub expiry: f64,
    pub rate: f64,
    pub dividend: f64,
    pub vol: f64,
}

impl MarketParams {
    pub fn new(strike: f64, expiry: f64, rate: f64, dividend: f64, vol: f64) -> Result<Self> {
        let p = MarketParams {
            strike,
            expiry,
            rate,
            dividend,
            vol,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.strike, self.expiry, self.rate, self.dividend, self.vol]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return domain("market parameters must be finite");
        }
        if self.strike <= 0.0 {
            return domain(format!("strike must be positive, got {}", self.strike));
        }
        if self.expiry <= 0.0 {
            return domain(format!("expiry must be positive, got {}", self.expiry));
        }
        if self.vol <= 0.0 {
            return domain(format!("volatility must be positive, got {}", self.vol));
        }
        if self.rate < 0.0 || self.dividend < 0.0 {
            return domain("rate and dividend yield must be non-negative");
        }
        Ok(())
    }

    /// Parameters of the put that prices the corresponding call by put-call
    /// symmetry: strike and spot swap, rate and dividend yield swap.
    pub fn call_symmetric(&self, spot: f64) -> MarketParams {
        MarketParams {
            strike: spot,
            expiry: self.expiry,
            rate: self.dividend,
            dividend: self.rate,
            vol: self.vol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D12 {
    pub d1: f64,
    pub d2: f64,
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, `0.5 * erfc(-x / sqrt 2)`.
///
/// Non-finite inputs are rejected; see [`norm_cdf_unchecked`] for hot loops
/// where the argument is known to be finite or infinite by construction.
pub fn norm_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("norm_cdf argument must be finite, got {x}"));
    }
    Ok(norm_cdf_unchecked(x))
}

/// Normal CDF without the finiteness check. `±inf` map to 1 and 0.
#[inline]
pub fn norm_cdf_unchecked(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `d1(x, t, y)` and `d2 = d1 - sigma sqrt t`.
pub fn d1d2(x: f64, t: f64, y: f64, p: &MarketParams) -> Result<D12> {
    if !(t > 0.0) {
        return domain(format!("d1d2 needs t > 0, got {t}"));
    }
    if !(x > 0.0 && y > 0.0) {
        return domain(format!("d1d2 needs positive prices, got x={x}, y={y}"));
    }
    Ok(d12_raw(x, t, y, p))
}

#[inline]
pub(crate) fn d12_raw(x: f64, t: f64, y: f64, p: &MarketParams) -> D12 {
    let sst = p.vol * t.sqrt();
    let d1 = ((x / y).ln() + (p.rate - p.dividend + 0.5 * p.vol * p.vol) * t) / sst;
    D12 { d1, d2: d1 - sst }
}

/// European put with time-to-expiry `t` and spot `s`.
pub fn european_put(t: f64, s: f64, p: &MarketParams) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return domain(format!("spot must be positive, got {s}"));
    }
    if !(t >= 0.0) {
        return domain(format!("time-to-expiry must be non-negative, got {t}"));
    }
    if t == 0.0 {
        return Ok((p.strike - s).max(0.0));
    }
    let D12 { d1, d2 } = d12_raw(s, t, p.strike, p);
    Ok(p.strike * (-p.rate * t).exp() * norm_cdf_unchecked(-d2)
        - s * (-p.dividend * t).exp() * norm_cdf_unchecked(-d1))
}

/// European call, used for the no-dividend call shortcut and cross checks.
pub fn european_call(t: f64, s: f64, p: &MarketParams) -> Result<f64> {
    let put = european_put(t, s, p)?;
    // parity: C - P = S e^{-dt} - K e^{-rt}
    Ok(put + s * (-p.dividend * t).exp() - p.strike * (-p.rate * t).exp())
}

/// Cox-Ross-Rubinstein lattice value of an American put at time-to-expiry
/// `p.expiry`.
pub fn binomial_american_put(steps: usize, s: f64, p: &MarketParams) -> Result<f64> {
    if steps == 0 {
        return config("binomial tree needs at least one step");
    }
    if !(s > 0.0) {
        return domain(format!("spot must be positive, got {s}"));
    }
    let dt = p.expiry / steps as f64;
    let u = (p.vol * dt.sqrt()).exp();
    let d = 1.0 / u;
    let q = (((p.rate - p.dividend) * dt).exp() - d) / (u - d);
    if !(q > 0.0 && q < 1.0) {
        return config(format!(
            "risk-neutral probability {q} outside (0, 1); use more steps"
        ));
    }
    let disc = (-p.rate * dt).exp();
    let (pu, pd) = (disc * q, disc * (1.0 - q));
    let k = p.strike;

    // node j at level n has spot s u^j d^(n-j) = s u^(2j-n)
    let mut values: Vec<f64> = (0..=steps)
        .map(|j| (k - s * u.powi(2 * j as i32 - steps as i32)).max(0.0))
        .collect();
    for level in (0..steps).rev() {
        let mut spot = s * u.powi(-(level as i32));
        let u2 = u * u;
        for j in 0..=level {
            let cont = pu * values[j + 1] + pd * values[j];
            values[j] = cont.max(k - spot);
            spot *= u2;
        }
    }
    Ok(values[0])
}

/// Lattice value of a European put, for convergence checks of the tree.
pub fn binomial_european_put(steps: usize, s: f64, p: &MarketParams) -> Result<f64> {
    if steps == 0 {
        return config("binomial tree needs at least one step");
    }
    let dt = p.expiry / steps as f64;
    let u = (p.vol * dt.sqrt()).exp();
    let d = 1.0 / u;
    let q = (((p.rate - p.dividend) * dt).exp() - d) / (u - d);
    if !(q > 0.0 && q < 1.0) {
        return config(format!("risk-neutral probability {q} outside (0, 1)"));
    }
    let disc = (-p.rate * dt).exp();
    let mut values: Vec<f64> = (0..=steps)
        .map(|j| (p.strike - s * u.powi(2 * j as i32 - steps as i32)).max(0.0))
        .collect();
    for level in (0..steps).rev() {
        for j in 0..=level {
            values[j] = disc * (q * values[j + 1] + (1.0 - q) * values[j]);
        }
    }
    Ok(values[0])
}
