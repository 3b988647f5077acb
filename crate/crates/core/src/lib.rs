//! Early exercise boundary and price of American options.
//!
//! The boundary `B(t)` of an American put (with `t` the time to expiry)
//! solves a nonlinear Volterra integral equation with a `1/sqrt(t - s)`
//! kernel. This crate discretizes it by product integration: the smooth
//! part of the kernel is interpolated with linear barycentric rational
//! interpolants (Berrut or Floater-Hormann) and integrated exactly against
//! the singular factor. Prices follow from the early exercise premium
//! representation with barycentric rational quadrature, and a CRR binomial
//! tree serves as the reference.
//!
//! ```no_run
//! use kimvolterra_core::{american_put_price, solve_boundary, MarketParams, SolverConfig};
//!
//! let p = MarketParams::new(100.0, 3.0, 0.08, 0.08, 0.2)?;
//! let curve = solve_boundary(&SolverConfig::new(32, 2), &p)?;
//! let price = american_put_price(3.0, 100.0, &curve, 2)?;
//! println!("{:.4}", price.value);
//! # Ok::<(), kimvolterra_core::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barycentric;
pub mod boundary;
pub mod error;
pub mod exec;
pub mod market;
pub mod pricing;
pub mod quadrature;

pub use barycentric::{
    berrut_weights, eval_interpolant, fh_weights, lagrange_weights, lebesgue_constant, BaryBasis,
    Family,
};
pub use boundary::{
    collocation_residuals, eval_boundary, hybrid_total_nodes, initial_boundary, kernel_direct,
    kernel_div, kernel_nodiv, perpetual_lower_bound, perpetual_theta, solve_boundary,
    solve_boundary_cached, solve_boundary_hybrid, solve_boundary_kim2d, BfhSplit, BoundaryCurve,
    Diagnostics, Grid, GridTables, Scheme, SolverConfig, StepDiagnostics, TableCache,
};
pub use error::{Error, Result};
pub use exec::Exec;
pub use market::{
    binomial_american_put, binomial_european_put, d1d2, european_call, european_put, norm_cdf,
    norm_pdf, MarketParams, D12,
};
pub use pricing::{
    american_call_price, american_put_price, error_bound_factor, premium_representation,
    PriceResult,
};
pub use quadrature::{
    brq_weights, gauss_legendre, product_weights, product_weights_with, ProductWeights,
    QuadratureRule,
};
