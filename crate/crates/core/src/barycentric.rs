//! Linear barycentric interpolation on equispaced nodes.
//!
//! The interpolant of data `f_i` at nodes `t_i` is
//!
//! ```text
//!            sum_i  beta_i / (t - t_i) * f_i
//! (P f)(t) = -------------------------------
//!            sum_i  beta_i / (t - t_i)
//! ```
//!
//! and `L_i(t)` denotes the cardinal function attached to node `i`. Three
//! weight families are provided: polynomial (Lagrange), Berrut's
//! `(-1)^i`, and the Floater-Hormann family `FH(d)` which blends local
//! polynomials of degree `d` and has no real poles.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{domain, Result};

/// Relative tolerance (in units of the node span) for treating an evaluation
/// point as coincident with a node.
pub const NODE_TOL: f64 = 1e-14;

/// Relative tolerance on the spacing of an equispaced grid.
const SPACING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Lagrange,
    Berrut,
    FloaterHormann(usize),
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Lagrange => write!(f, "Lagrange"),
            Family::Berrut => write!(f, "Berrut"),
            Family::FloaterHormann(d) => write!(f, "FH({d})"),
        }
    }
}

/// Equispaced interpolation nodes together with their barycentric weights.
///
/// Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct BaryBasis {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    family: Family,
    spacing: f64,
}

impl BaryBasis {
    /// `n + 1` nodes `t0 + k * spacing`, `k = 0..=n`.
    pub fn equispaced(t0: f64, spacing: f64, n: usize, family: Family) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() || !t0.is_finite() {
            return domain(format!("invalid grid spacing {spacing}"));
        }
        if n == 0 {
            return domain("an interpolation basis needs at least two nodes");
        }
        let nodes = (0..=n).map(|k| t0 + k as f64 * spacing).collect();
        Self::build(nodes, spacing, family)
    }

    /// Basis on explicit nodes, which must be strictly increasing and equispaced.
    pub fn from_nodes(nodes: Vec<f64>, family: Family) -> Result<Self> {
        if nodes.len() < 2 {
            return domain("an interpolation basis needs at least two nodes");
        }
        let n = nodes.len() - 1;
        let span = nodes[n] - nodes[0];
        let spacing = span / n as f64;
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) {
                return domain("nodes must be strictly increasing");
            }
            if ((w[1] - w[0]) - spacing).abs() > SPACING_TOL * span {
                return domain("nodes must be equispaced");
            }
        }
        Self::build(nodes, spacing, family)
    }

    fn build(nodes: Vec<f64>, spacing: f64, family: Family) -> Result<Self> {
        let n = nodes.len() - 1;
        let weights = match family {
            Family::Lagrange => lagrange_weights(&nodes)?,
            Family::Berrut => berrut_weights(n),
            Family::FloaterHormann(d) => fh_weights(n, d)?,
        };
        Ok(BaryBasis {
            nodes,
            weights,
            family,
            spacing,
        })
    }

    /// Replace the weights by `scale * weights`. The interpolant is unchanged.
    pub fn rescaled(&self, scale: f64) -> BaryBasis {
        BaryBasis {
            weights: self.weights.iter().map(|w| w * scale).collect(),
            ..self.clone()
        }
    }

    /// The basis on the first `i + 1` nodes. A Floater-Hormann order larger
    /// than `i` is lowered to `i`.
    pub fn prefix(&self, i: usize) -> Result<BaryBasis> {
        if i == 0 || i >= self.nodes.len() {
            return domain(format!(
                "prefix index {i} outside 1..={}",
                self.nodes.len() - 1
            ));
        }
        let family = match self.family {
            Family::FloaterHormann(d) => Family::FloaterHormann(d.min(i)),
            f => f,
        };
        Self::build(self.nodes[..=i].to_vec(), self.spacing, family)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of intervals, i.e. `len() - 1`.
    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Index of the node within `NODE_TOL * span` of `t`, if any.
    pub fn coincident_node(&self, t: f64) -> Option<usize> {
        let span = self.end() - self.start();
        let k = ((t - self.start()) / self.spacing).round();
        if k < 0.0 || k > self.degree() as f64 {
            return None;
        }
        let k = k as usize;
        ((t - self.nodes[k]).abs() <= NODE_TOL * span).then_some(k)
    }

    /// Writes `L_j(t)` for every node into `out`.
    pub fn cardinals_into(&self, t: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.nodes.len());
        if let Some(k) = self.coincident_node(t) {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[k] = 1.0;
            return;
        }
        let mut denom = 0.0;
        for ((o, &b), &x) in out.iter_mut().zip(&self.weights).zip(&self.nodes) {
            *o = b / (t - x);
            denom += *o;
        }
        let inv = 1.0 / denom;
        out.iter_mut().for_each(|v| *v *= inv);
    }

    pub fn cardinals(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        self.cardinals_into(t, &mut out);
        out
    }

    /// Value of the interpolant of `values` at `t`.
    pub fn eval(&self, values: &[f64], t: f64) -> Result<f64> {
        if values.len() != self.nodes.len() {
            return domain(format!(
                "{} values for {} nodes",
                values.len(),
                self.nodes.len()
            ));
        }
        Ok(self.eval_unchecked(values, t))
    }

    pub(crate) fn eval_unchecked(&self, values: &[f64], t: f64) -> f64 {
        if let Some(k) = self.coincident_node(t) {
            return values[k];
        }
        let (mut num, mut den) = (0.0, 0.0);
        for ((&b, &x), &f) in self.weights.iter().zip(&self.nodes).zip(values) {
            let c = b / (t - x);
            num += c * f;
            den += c;
        }
        num / den
    }

    /// Denominator `sum_i beta_i / (t - t_i)`; infinite at nodes.
    pub fn denominator(&self, t: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.nodes)
            .map(|(b, x)| b / (t - x))
            .sum()
    }

    /// Lebesgue function `sum_i |L_i(t)|`.
    pub fn lebesgue_function(&self, t: f64) -> f64 {
        if self.coincident_node(t).is_some() {
            return 1.0;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (&b, &x) in self.weights.iter().zip(&self.nodes) {
            let c = b / (t - x);
            num += c.abs();
            den += c;
        }
        num / den.abs()
    }
}

/// Polynomial weights `1 / prod_{j != i} (t_i - t_j)`, rescaled by a common
/// factor `(4 / span)^n` to stay in range.
pub fn lagrange_weights(nodes: &[f64]) -> Result<Vec<f64>> {
    if nodes.len() < 2 {
        return domain("Lagrange weights need at least two nodes");
    }
    let span = nodes.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - nodes.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let cap = 4.0 / span;
    let mut out = Vec::with_capacity(nodes.len());
    for (i, &ti) in nodes.iter().enumerate() {
        let mut prod = 1.0;
        for (j, &tj) in nodes.iter().enumerate() {
            if i != j {
                let diff = ti - tj;
                if diff == 0.0 {
                    return domain(format!("duplicate node {ti}"));
                }
                prod *= cap * diff;
            }
        }
        out.push(1.0 / prod);
    }
    Ok(out)
}

/// Berrut's weights `(-1)^i`, `i = 0..=n`.
pub fn berrut_weights(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect()
}

/// Floater-Hormann weights on `n + 1` equispaced nodes,
/// `beta_i = (-1)^(i-d) sum_{j in J_i} C(d, i-j)` with
/// `J_i = { max(0, i-d) <= j <= min(i, n-d) }`.
pub fn fh_weights(n: usize, d: usize) -> Result<Vec<f64>> {
    if d > n {
        return domain(format!("Floater-Hormann order {d} exceeds n = {n}"));
    }
    let binom = binomial_row(d);
    let weights = (0..=n)
        .map(|i| {
            let lo = i.saturating_sub(d);
            let hi = i.min(n - d);
            let mag: f64 = (lo..=hi).map(|j| binom[i - j]).sum();
            let odd = (i + d) % 2 == 1;
            if odd {
                -mag
            } else {
                mag
            }
        })
        .collect();
    Ok(weights)
}

fn binomial_row(d: usize) -> Vec<f64> {
    let mut row = vec![1.0f64; d + 1];
    for k in 1..d {
        row[k] = row[k - 1] * (d - k + 1) as f64 / k as f64;
    }
    row
}

pub fn eval_interpolant(basis: &BaryBasis, values: &[f64], t: f64) -> Result<f64> {
    basis.eval(values, t)
}

/// Lower estimate of the Lebesgue constant from `oversample` evaluation
/// points per subinterval (nodes included).
pub fn lebesgue_constant(basis: &BaryBasis, oversample: usize) -> f64 {
    let m = oversample.max(1);
    let h = basis.spacing();
    let mut best: f64 = 1.0;
    for &t0 in &basis.nodes()[..basis.degree()] {
        for k in 1..m {
            let t = t0 + h * k as f64 / m as f64;
            best = best.max(basis.lebesgue_function(t));
        }
    }
    best
}
