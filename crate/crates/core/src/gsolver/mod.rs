//! Backward Monte Carlo solver for the value-function factor g̃ = e^g.
//!
//! g̃ satisfies the fixed-point representation
//!
//! ```text
//! g̃(t, λ) = 1 − E_{t,λ}[ ∫_t^T g̃ Ẑᵀ Γ⁻¹ Ẑ (s, λ(s)) ds ]
//! ```
//!
//! where Γ and Ẑ depend on g̃ non-locally through the ratios
//! `U_l = g̃(s, λ + β_(l)) / g̃(s, λ) − 1`. The solver walks the time grid
//! backwards from `g̃(T, ·) = 1`, estimating each slice by simulating
//! intensity paths forward to `T` against the slices already solved.

mod grid;
mod poisson;
mod residual;
mod solve;
mod table;

pub use grid::{build_grids, SpatialGrid};
pub use poisson::{adaptive_simpson, poisson_g, poisson_g_constant, PoissonG};
pub use residual::{pde_residual, ResidualReport};
pub use solve::solve_g;
pub use table::{cache_key, eval_g, format_float, hawkes_hash, market_hash, GTable, Slice, TableMeta, FORMAT_VERSION};

use serde::{Deserialize, Serialize};

/// Rule used for the time integral along each simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeQuadrature {
    /// Integrand sampled at the end of every step, i.e. on the slices already solved.
    #[default]
    RightEndpoint,
    /// Half weight on both ends; the start-point term reuses the next slice's surface.
    Trapezoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub horizon: f64,
    pub dt: f64,
    pub dlam: f64,
    pub lam_lo: f64,
    pub lam_hi: f64,
    /// Paths per grid point.
    pub paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub quadrature: TimeQuadrature,
    /// Upper limit on grid growth in λ; defaults to `4 · lam_hi`.
    #[serde(default)]
    pub growth_cap: Option<f64>,
    /// Budget on the total number of grid points over all slices.
    #[serde(default = "default_max_points")]
    pub max_points: usize,
}

fn default_max_points() -> usize {
    20_000_000
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            horizon: 2.0,
            dt: 0.02,
            dlam: 0.01,
            lam_lo: 0.1,
            lam_hi: 2.0,
            paths: 5000,
            seed: 0,
            quadrature: TimeQuadrature::RightEndpoint,
            growth_cap: None,
            max_points: default_max_points(),
        }
    }
}

impl SolverSettings {
    pub fn cap(&self) -> f64 {
        self.growth_cap.unwrap_or(4.0 * self.lam_hi)
    }
}
