//! Efficient strategy, Lagrange multiplier and efficient frontier.
//!
//! Everything is driven by the single number `g0 = g̃(0, λ₀) ∈ (0, 1)`:
//!
//! ```text
//! θ*          = g0 / (1 − g0) · (x₀e^{rT} − ξ)
//! Var[X*(T)]  = g0 / (1 − g0) · (x₀e^{rT} − ξ)²
//! π*(t)       = −Γ(t, λ)⁻¹ Ẑ(t, λ) · (X(t−) − (ξ − θ*) e^{−r(T−t)})
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsolver::{poisson_g, GTable};
use crate::hawkes::HawkesParams;
use crate::market::{Coefficients, MarketParams};

/// A value of g0 within this many standard errors of one is rejected.
pub const G0_GUARD_SE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub xi: f64,
    pub theta_star: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub g0: f64,
}

fn riskless_terminal(x0: f64, r: f64, horizon: f64) -> f64 {
    x0 * (r * horizon).exp()
}

fn check_g0(g0: f64) -> Result<()> {
    if !(g0 > 0.0 && g0 < 1.0) {
        return Err(Error::InvalidG(g0));
    }
    Ok(())
}

fn check_xi(xi: f64, x0: f64, r: f64, horizon: f64) -> Result<f64> {
    let floor = riskless_terminal(x0, r, horizon);
    if !(xi.is_finite() && xi >= floor * (1.0 - 1e-14)) {
        return Err(Error::param(
            "frontier.xi",
            format!("target {xi} is below the riskless terminal wealth {floor}"),
        ));
    }
    Ok(floor)
}

/// Lagrange multiplier θ* for target `xi`. Always ≤ 0.
pub fn theta_star(g0: f64, x0: f64, r: f64, horizon: f64, xi: f64) -> Result<f64> {
    check_g0(g0)?;
    let floor = check_xi(xi, x0, r, horizon)?;
    Ok(g0 / (1.0 - g0) * (floor - xi).min(0.0))
}

/// Minimal terminal variance for each target in `xi_list`.
pub fn efficient_frontier(g0: f64, x0: f64, r: f64, horizon: f64, xi_list: &[f64]) -> Result<Vec<FrontierPoint>> {
    check_g0(g0)?;
    xi_list
        .iter()
        .map(|&xi| {
            let floor = check_xi(xi, x0, r, horizon)?;
            let gap = (floor - xi).min(0.0);
            let ratio = g0 / (1.0 - g0);
            let variance = ratio * gap * gap;
            Ok(FrontierPoint {
                xi,
                theta_star: ratio * gap,
                variance,
                std_dev: variance.sqrt(),
                g0,
            })
        })
        .collect()
}

/// Optimal quadratic loss `min E[(X(T) − c)²] = g0 (x₀e^{rT} − c)²`.
pub fn optimal_quadratic_cost(g0: f64, x0: f64, r: f64, horizon: f64, c: f64) -> f64 {
    let d = riskless_terminal(x0, r, horizon) - c;
    g0 * d * d
}

/// Frontier in a market with deterministic jump intensity `lambda_path`.
pub fn poisson_frontier<F: Fn(f64) -> Vec<f64>>(
    market: &MarketParams,
    lambda_path: F,
    x0: f64,
    horizon: f64,
    xi_list: &[f64],
) -> Result<Vec<FrontierPoint>> {
    let g0 = poisson_g(market, lambda_path, horizon)?.tilde_at(0.0)?;
    efficient_frontier(g0, x0, market.r, horizon, xi_list)
}

/// g̃(0, λ₀) from a solved table, rejected when it cannot be told apart from one.
pub fn g0_from_table(table: &GTable, lambda0: &[f64]) -> Result<f64> {
    let g0 = table.initial_value(lambda0)?;
    let se = table.initial_std_err(lambda0);
    if !(g0 > 0.0) || g0 + G0_GUARD_SE * se >= 1.0 {
        log::error!("g0 = {g0} (standard error {se:.3e}) is indistinguishable from 1");
        return Err(Error::InvalidG(g0));
    }
    Ok(g0)
}

/// Frontier from a solved table evaluated at the initial intensity `lambda0`.
pub fn frontier_from_table(table: &GTable, lambda0: &[f64], x0: f64, xi_list: &[f64]) -> Result<Vec<FrontierPoint>> {
    let g0 = g0_from_table(table, lambda0)?;
    efficient_frontier(g0, x0, table.meta.market.r, table.horizon(), xi_list)
}

/// Work buffers for [`StrategyField::direction_into`].
#[derive(Debug, Clone)]
pub struct Scratch {
    u: Vec<f64>,
    shifted: Vec<f64>,
}

impl Scratch {
    pub fn new(dim: usize) -> Self {
        Self {
            u: vec![0.0; dim],
            shifted: vec![0.0; dim],
        }
    }
}

/// Where Γ and Ẑ come from when the strategy is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum CoefficientSource<'a> {
    /// Non-local ratios read off a solved surface.
    Surface(&'a GTable),
    /// U ≡ 0: the deterministic-intensity strategy −Γ_P(λ)⁻¹B.
    Poisson,
}

/// The efficient feedback strategy for a fixed target ξ.
#[derive(Debug, Clone)]
pub struct StrategyField<'a> {
    pub source: CoefficientSource<'a>,
    pub hawkes: HawkesParams,
    pub market: MarketParams,
    pub theta_star: f64,
    pub xi: f64,
    pub horizon: f64,
    pub g0: f64,
    coeffs: Coefficients,
    shifts: Vec<Vec<f64>>,
    /// (ξ − θ*) e^{−rT}, computed so that it equals x₀ exactly on the riskless target.
    discounted_target: f64,
}

impl<'a> StrategyField<'a> {
    /// Strategy built on a solved surface.
    pub fn from_table(table: &'a GTable, lambda0: &[f64], x0: f64, xi: f64) -> Result<Self> {
        let g0 = g0_from_table(table, lambda0)?;
        let hawkes = table.meta.hawkes.with_lambda0(lambda0.to_vec())?;
        Self::build(
            CoefficientSource::Surface(table),
            hawkes,
            table.meta.market.clone(),
            g0,
            x0,
            xi,
            table.horizon(),
        )
    }

    /// Deterministic-intensity strategy; `hawkes` must have β = 0.
    pub fn poisson(hawkes: &HawkesParams, market: &MarketParams, x0: f64, xi: f64, horizon: f64) -> Result<Self> {
        if !hawkes.is_poisson() {
            return Err(Error::param("hawkes.beta", "the Poisson strategy needs beta = 0"));
        }
        let h = hawkes.clone();
        let g0 = poisson_g(
            market,
            move |s| (0..h.dim()).map(|l| h.decay(l, h.lambda0[l], s)).collect(),
            horizon,
        )?
        .tilde_at(0.0)?;
        Self::build(
            CoefficientSource::Poisson,
            hawkes.clone(),
            market.clone(),
            g0,
            x0,
            xi,
            horizon,
        )
    }

    fn build(
        source: CoefficientSource<'a>,
        hawkes: HawkesParams,
        market: MarketParams,
        g0: f64,
        x0: f64,
        xi: f64,
        horizon: f64,
    ) -> Result<Self> {
        let r = market.r;
        let theta = theta_star(g0, x0, r, horizon, xi)?;
        let floor = riskless_terminal(x0, r, horizon);
        let discounted_target = x0 + (xi - floor - theta) * (-r * horizon).exp();
        let shifts = (0..hawkes.dim()).map(|l| hawkes.beta_column(l)).collect();
        Ok(Self {
            source,
            coeffs: market.coefficients(),
            shifts,
            hawkes,
            market,
            theta_star: theta,
            xi,
            horizon,
            g0,
            discounted_target,
        })
    }

    /// (ξ − θ*) e^{−r(T−t)}.
    pub fn target(&self, t: f64) -> f64 {
        self.discounted_target * (self.market.r * t).exp()
    }

    /// e^{−rt}(X − target(t)) given discounted wealth `y = e^{−rt}X`.
    #[inline]
    pub fn discounted_gap(&self, y: f64) -> f64 {
        y - self.discounted_target
    }

    /// Γ(t, λ)⁻¹ Ẑ(t, λ).
    pub fn direction(&self, t: f64, lambda: &[f64]) -> Result<Vec<f64>> {
        let mut scratch = Scratch::new(self.hawkes.dim());
        let mut out = vec![0.0; self.market.assets()];
        self.direction_into(t, lambda, &mut scratch, &mut out)?;
        Ok(out)
    }

    /// [`Self::direction`] without allocating.
    #[inline]
    pub fn direction_into(&self, t: f64, lambda: &[f64], scratch: &mut Scratch, out: &mut [f64]) -> Result<()> {
        let m = lambda.len();
        let Scratch { u, shifted } = scratch;
        u.iter_mut().for_each(|x| *x = 0.0);
        if let CoefficientSource::Surface(table) = self.source {
            let slice = table.slice_at(t);
            let (g, _) = slice.interpolate(lambda);
            for l in 0..m {
                if self.shifts[l].iter().all(|b| *b == 0.0) {
                    continue;
                }
                for i in 0..m {
                    shifted[i] = lambda[i] + self.shifts[l][i];
                }
                u[l] = slice.interpolate(shifted).0 / g - 1.0;
            }
        }
        self.coeffs.control_direction_into(lambda, u, out)
    }

    /// π*(t) for wealth `x` (just before t) and intensity `lambda`.
    pub fn control(&self, t: f64, x: f64, lambda: &[f64]) -> Result<Vec<f64>> {
        let shift = x - self.target(t);
        Ok(self.direction(t, lambda)?.into_iter().map(|d| -d * shift).collect())
    }
}
