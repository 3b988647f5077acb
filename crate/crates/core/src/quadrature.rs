//! Gauss-Legendre rules, barycentric rational quadrature, and the product
//! integration weights of the Abel kernel `(t_i - s)^(-alpha)`.

use serde::{Deserialize, Serialize};

use crate::barycentric::BaryBasis;
use crate::error::{domain, Result};

/// Gauss-Legendre points per panel used for the singular product weights
/// and the barycentric quadrature weights.
pub const DEFAULT_PANEL_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Affine image of the rule on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> QuadratureRule {
        let scale = (b - a) / (self.b - self.a);
        QuadratureRule {
            a,
            b,
            nodes: self
                .nodes
                .iter()
                .map(|x| a + (x - self.a) * scale)
                .collect(),
            weights: self.weights.iter().map(|w| w * scale).collect(),
        }
    }
}

/// `m`-point Gauss-Legendre rule on `[-1, 1]`.
///
/// Roots are found by Newton's method on the three-term recurrence,
/// stopping at a `1e-15` step or after 100 iterations.
pub fn gauss_legendre(m: usize) -> Result<QuadratureRule> {
    if m == 0 {
        return domain("Gauss-Legendre rule needs at least one point");
    }
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let half = m.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    Ok(QuadratureRule {
        a: -1.0,
        b: 1.0,
        nodes,
        weights,
    })
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if m == 0 { p0 } else { p1 };
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, d)
}

/// Barycentric rational quadrature weights `omega_i = int_a^b L_i(t) dt`,
/// integrated panel by panel between consecutive nodes.
pub fn brq_weights(basis: &BaryBasis, a: f64, b: f64) -> Result<QuadratureRule> {
    brq_weights_with(basis, a, b, DEFAULT_PANEL_POINTS)
}

pub fn brq_weights_with(
    basis: &BaryBasis,
    a: f64,
    b: f64,
    points: usize,
) -> Result<QuadratureRule> {
    let span_tol = 1e-12 * (basis.end() - basis.start());
    if !(a < b) || a < basis.start() - span_tol || b > basis.end() + span_tol {
        return domain(format!(
            "interval [{a}, {b}] not inside the basis span [{}, {}]",
            basis.start(),
            basis.end()
        ));
    }
    let gl = gauss_legendre(points)?;
    let mut breaks = vec![a];
    breaks.extend(basis.nodes().iter().copied().filter(|&t| t > a && t < b));
    breaks.push(b);

    let mut weights = vec![0.0; basis.len()];
    let mut card = vec![0.0; basis.len()];
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo <= span_tol {
            continue;
        }
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (&x, &gw) in gl.nodes.iter().zip(&gl.weights) {
            basis.cardinals_into(mid + half * x, &mut card);
            let scale = gw * half;
            for (acc, c) in weights.iter_mut().zip(&card) {
                *acc += scale * c;
            }
        }
    }
    Ok(QuadratureRule {
        a,
        b,
        nodes: basis.nodes().to_vec(),
        weights,
    })
}

/// One row of product integration weights,
/// `w_{i,j} = int_0^{t_i} L_j(s) (t_i - s)^(-alpha) ds`, `j = 0..=i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductWeights {
    pub row: usize,
    pub weights: Vec<f64>,
}

impl ProductWeights {
    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `sum_j w_{i,j} g_j`
    pub fn apply(&self, samples: &[f64]) -> f64 {
        self.weights.iter().zip(samples).map(|(w, g)| w * g).sum()
    }
}

/// Product weights of the `1/sqrt` kernel for row `i`, using the basis
/// restricted to its first `i + 1` nodes.
pub fn product_weights(i: usize, basis: &BaryBasis) -> Result<ProductWeights> {
    product_weights_with(i, basis, 0.5, DEFAULT_PANEL_POINTS)
}

/// Product weights for the kernel `(t_i - s)^(-alpha)`, `0 <= alpha < 1`.
///
/// The change of variables `s = t_i - v^p`, `p = 1 / (1 - alpha)` turns the
/// integrand into the smooth `p L_j(t_i - v^p)`. The `v`-range is split at
/// the images of the nodes and each panel gets `points` Gauss-Legendre
/// points. For `alpha = 1/2` this is `s = t_i - u^2`.
pub fn product_weights_with(
    i: usize,
    basis: &BaryBasis,
    alpha: f64,
    points: usize,
) -> Result<ProductWeights> {
    if i == 0 {
        return domain("product weights need i >= 1 (row 0 has an empty range)");
    }
    if !(0.0..1.0).contains(&alpha) {
        return domain(format!("kernel exponent {alpha} outside [0, 1)"));
    }
    let sub = basis.prefix(i)?;
    let gl = gauss_legendre(points)?;
    Ok(ProductWeights {
        row: i,
        weights: abel_row(&sub, alpha, &gl),
    })
}

/// Weights of `int_{t_0}^{t_last} L_j(s) (t_last - s)^(-alpha) ds` on the whole
/// of `sub`, with a prepared `[-1, 1]` rule.
pub(crate) fn abel_row(sub: &BaryBasis, alpha: f64, gl: &QuadratureRule) -> Vec<f64> {
    let p = 1.0 / (1.0 - alpha);
    let nodes = sub.nodes();
    let ti = sub.end();
    let mut weights = vec![0.0; nodes.len()];
    let mut card = vec![0.0; nodes.len()];
    let to_v = |s: f64| (ti - s).max(0.0).powf(1.0 / p);

    for k in (0..nodes.len() - 1).rev() {
        // panel between s = t_{k+1} and s = t_k
        let (v_lo, v_hi) = (to_v(nodes[k + 1]), to_v(nodes[k]));
        let (mid, half) = (0.5 * (v_lo + v_hi), 0.5 * (v_hi - v_lo));
        for (&x, &gw) in gl.nodes.iter().zip(&gl.weights) {
            let v = mid + half * x;
            let s = ti - v.powf(p);
            sub.cardinals_into(s, &mut card);
            let scale = gw * half * p;
            for (acc, c) in weights.iter_mut().zip(&card) {
                *acc += scale * c;
            }
        }
    }
    weights
}
