//! Mean-variance portfolio selection in a jump-diffusion market whose jump
//! arrivals follow a multivariate Hawkes process.
//!
//! * [`hawkes`]: intensity model, exact and discretized simulation, moments.
//! * [`market`]: market coefficients Γ, Ẑ and jump-mark samplers.
//! * [`gsolver`]: backward Monte Carlo solver for the value-function factor g̃.
//! * [`frontier`]: Lagrange multiplier, efficient frontier and strategy.
//! * [`wealth`]: forward wealth simulation under the efficient strategy.

// `!(x > 0.0)` is meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod frontier;
pub mod gsolver;
pub mod hawkes;
pub mod market;
pub mod rng;
pub mod wealth;

pub use error::{Error, Result};
pub use frontier::{
    efficient_frontier, frontier_from_table, poisson_frontier, theta_star, CoefficientSource, FrontierPoint,
    StrategyField,
};
pub use gsolver::{eval_g, poisson_g, solve_g, GTable, SolverSettings, TimeQuadrature};
pub use hawkes::{expected_intensity, simulate_discretized, simulate_exact, HawkesParams, IntensityPath};
pub use market::{JumpLaw, MarketParams};
pub use wealth::{simulate_wealth, WealthSettings, WealthSummary};
