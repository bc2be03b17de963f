//! Market model: a risk-free account plus `k` risky assets driven by an
//! `n`-dimensional Brownian motion and `m` Hawkes jump components.
//!
//! Jump sizes enter every coefficient only through `E[Z_l]` and `E[Z_l²]`
//! because the jump matrix `η(z) = [J_il z_l]` is linear in `z`. The full
//! jump law is needed only when sampling marks for wealth simulation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest condition number accepted for Γ.
pub const MAX_CONDITION: f64 = 1e12;

const MOMENT_TOL: f64 = 1e-12;

/// Sampling law of a jump mark, moment-matched to `(jump_mean, jump_second)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum JumpLaw {
    /// `mean ± sd` with probability one half each.
    #[default]
    TwoPoint,
    /// Uniform on `[mean − √3 sd, mean + √3 sd]`.
    Uniform,
    /// `Y − 1` with `Y` lognormal.
    ShiftedLognormal,
    /// Point mass at `value`.
    Degenerate { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    /// Risk-free rate.
    pub r: f64,
    /// Expected returns, length `k`.
    pub mu: Vec<f64>,
    /// Volatility matrix, `k × n`.
    pub sigma: Vec<Vec<f64>>,
    /// Jump scaling factors `J`, `k × m`, entries in `[0, 1]`.
    pub jump_scale: Vec<Vec<f64>>,
    /// `E[Z_l]`.
    pub jump_mean: Vec<f64>,
    /// `E[Z_l²]`.
    pub jump_second: Vec<f64>,
    /// One sampling law per component. Empty means two-point for all.
    #[serde(default)]
    pub jump_law: Vec<JumpLaw>,
}

impl MarketParams {
    /// Single asset, single jump component.
    pub fn univariate(r: f64, mu: f64, sigma: f64, j: f64, jump_mean: f64, jump_second: f64) -> Result<Self> {
        let p = Self {
            r,
            mu: vec![mu],
            sigma: vec![vec![sigma]],
            jump_scale: vec![vec![j]],
            jump_mean: vec![jump_mean],
            jump_second: vec![jump_second],
            jump_law: vec![JumpLaw::TwoPoint],
        };
        p.validate()?;
        Ok(p)
    }

    /// r = 2%, μ = 9%, σ = 20%, J = 1, E[Z] = −2%, E[Z²] = 6%.
    pub fn reference() -> Self {
        Self::univariate(0.02, 0.09, 0.20, 1.0, -0.02, 0.06).expect("reference parameters are valid")
    }

    pub fn assets(&self) -> usize {
        self.mu.len()
    }

    pub fn brownian_dim(&self) -> usize {
        self.sigma.first().map_or(0, Vec::len)
    }

    pub fn jump_dim(&self) -> usize {
        self.jump_mean.len()
    }

    pub fn law(&self, l: usize) -> JumpLaw {
        self.jump_law.get(l).copied().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.mu.len();
        let m = self.jump_mean.len();
        if k == 0 {
            return Err(Error::param("market.mu", "at least one risky asset required"));
        }
        if !self.r.is_finite() {
            return Err(Error::param("market.r", "must be finite"));
        }
        if self.mu.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("market.mu", "entries must be finite"));
        }
        let n = self.brownian_dim();
        if self.sigma.len() != k || n == 0 || self.sigma.iter().any(|row| row.len() != n) {
            return Err(Error::param(
                "market.sigma",
                format!("expected a {k} x n matrix with n >= 1"),
            ));
        }
        if self.sigma.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::param("market.sigma", "entries must be finite"));
        }
        if self.jump_scale.len() != k || self.jump_scale.iter().any(|row| row.len() != m) {
            return Err(Error::param(
                "market.jump_scale",
                format!("expected a {k} x {m} matrix"),
            ));
        }
        if self.jump_scale.iter().flatten().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::param("market.jump_scale", "entries must lie in [0, 1]"));
        }
        if self.jump_second.len() != m {
            return Err(Error::param("market.jump_second", format!("expected {m} entries")));
        }
        if !self.jump_law.is_empty() && self.jump_law.len() != m {
            return Err(Error::param("market.jump_law", format!("expected {m} entries or none")));
        }
        for l in 0..m {
            let (mean, second) = (self.jump_mean[l], self.jump_second[l]);
            if !(mean.is_finite() && mean > -1.0) {
                return Err(Error::param("market.jump_mean", "entries must be finite and > -1"));
            }
            if !second.is_finite() || second < mean * mean - MOMENT_TOL {
                return Err(Error::param("market.jump_second", "must satisfy E[Z^2] >= E[Z]^2"));
            }
            LawSampler::new(l, self.law(l), mean, second)?;
        }
        let min_eig = self.sigma_cov().symmetric_eigenvalues().min();
        if !(min_eig > 0.0) {
            return Err(Error::param(
                "market.sigma",
                format!("sigma sigma^T must be positive definite (min eigenvalue {min_eig:.3e})"),
            ));
        }
        Ok(())
    }

    /// σσᵀ.
    pub fn sigma_cov(&self) -> DMatrix<f64> {
        let s = DMatrix::from_fn(self.assets(), self.brownian_dim(), |i, j| self.sigma[i][j]);
        &s * s.transpose()
    }

    /// Risk premium B = μ − r·1.
    pub fn risk_premium(&self) -> DVector<f64> {
        DVector::from_iterator(self.assets(), self.mu.iter().map(|m| m - self.r))
    }

    /// `∫ η(z) Diag[λ • ν(dz)] η(z)ᵀ`, entry `(i, i′) = Σ_l J_il J_i′l λ_l E[Z_l²]`.
    pub fn jump_quadratic(&self, lambda: &[f64]) -> DMatrix<f64> {
        let k = self.assets();
        DMatrix::from_fn(k, k, |i, ip| {
            (0..self.jump_dim())
                .map(|l| self.jump_scale[i][l] * self.jump_scale[ip][l] * lambda[l] * self.jump_second[l])
                .sum()
        })
    }

    /// Generalized covariance σσᵀ + jump quadratic form at intensity `lambda`.
    pub fn generalized_covariance(&self, lambda: &[f64]) -> DMatrix<f64> {
        self.sigma_cov() + self.jump_quadratic(lambda)
    }

    /// Jump-adjusted covariance Γ and risk premium Ẑ at intensity `lambda` with
    /// non-local ratios `u`:
    ///
    /// ```text
    /// Γ = σσᵀ + Σ_l (U_l + 1) λ_l E[Z_l²] J_·l J_·lᵀ
    /// Ẑ = B + Σ_l λ_l E[Z_l] U_l J_·l
    /// ```
    pub fn gamma_zhat(&self, lambda: &[f64], u: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let k = self.assets();
        let m = self.jump_dim();
        let mut gamma = self.sigma_cov();
        let mut zhat = self.risk_premium();
        for l in 0..m {
            let w = (u[l] + 1.0) * lambda[l] * self.jump_second[l];
            let z = lambda[l] * self.jump_mean[l] * u[l];
            for i in 0..k {
                zhat[i] += z * self.jump_scale[i][l];
                for ip in 0..k {
                    gamma[(i, ip)] += w * self.jump_scale[i][l] * self.jump_scale[ip][l];
                }
            }
        }
        let eig = gamma.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        if !(lo > 0.0) || hi / lo > MAX_CONDITION {
            return Err(Error::IllConditioned {
                condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
            });
        }
        Ok((gamma, zhat))
    }

    /// Hot-path evaluator for Γ and Ẑ.
    pub fn coefficients(&self) -> Coefficients {
        let k = self.assets();
        let cov = self.sigma_cov();
        Coefficients {
            k,
            cov: (0..k * k).map(|idx| cov[(idx / k, idx % k)]).collect(),
            premium: self.mu.iter().map(|m| m - self.r).collect(),
            columns: (0..self.jump_dim())
                .map(|l| (0..k).map(|i| self.jump_scale[i][l]).collect())
                .collect(),
            jump_mean: self.jump_mean.clone(),
            jump_second: self.jump_second.clone(),
        }
    }

    /// Samplers for every jump component.
    pub fn jump_sampler(&self) -> Result<JumpSampler> {
        let laws = (0..self.jump_dim())
            .map(|l| LawSampler::new(l, self.law(l), self.jump_mean[l], self.jump_second[l]))
            .collect::<Result<_>>()?;
        Ok(JumpSampler { laws })
    }
}

/// Draws one jump mark of component `l`.
pub fn sample_jump<R: Rng + ?Sized>(params: &MarketParams, l: usize, rng: &mut R) -> Result<f64> {
    let law = LawSampler::new(l, params.law(l), params.jump_mean[l], params.jump_second[l])?;
    Ok(law.sample(rng))
}

#[derive(Debug, Clone)]
enum LawSampler {
    TwoPoint { lo: f64, hi: f64 },
    Uniform { lo: f64, hi: f64 },
    ShiftedLognormal(LogNormal<f64>),
    Degenerate(f64),
}

impl LawSampler {
    fn new(component: usize, law: JumpLaw, mean: f64, second: f64) -> Result<Self> {
        let var = (second - mean * mean).max(0.0);
        let sd = var.sqrt();
        let err = |reason: String| Error::JumpLaw { component, reason };
        match law {
            JumpLaw::TwoPoint => {
                let (lo, hi) = (mean - sd, mean + sd);
                if lo <= -1.0 {
                    return Err(err(format!("lower atom {lo:.4} falls outside (-1, inf)")));
                }
                Ok(LawSampler::TwoPoint { lo, hi })
            }
            JumpLaw::Uniform => {
                let half = 3f64.sqrt() * sd;
                let (lo, hi) = (mean - half, mean + half);
                if lo <= -1.0 {
                    return Err(err(format!("support [{lo:.4}, {hi:.4}] leaves (-1, inf)")));
                }
                Ok(LawSampler::Uniform { lo, hi })
            }
            JumpLaw::ShiftedLognormal => {
                let scale = 1.0 + mean;
                let s2 = (1.0 + var / (scale * scale)).ln();
                let ln = LogNormal::new(scale.ln() - 0.5 * s2, s2.sqrt()).map_err(|e| err(e.to_string()))?;
                Ok(LawSampler::ShiftedLognormal(ln))
            }
            JumpLaw::Degenerate { value } => {
                if value <= -1.0 || (value - mean).abs() > 1e-12 || (value * value - second).abs() > 1e-12 {
                    return Err(err(format!(
                        "point mass at {value} has moments ({value}, {}) not ({mean}, {second})",
                        value * value
                    )));
                }
                Ok(LawSampler::Degenerate(value))
            }
        }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LawSampler::TwoPoint { lo, hi } => {
                if rng.gen::<bool>() {
                    *hi
                } else {
                    *lo
                }
            }
            LawSampler::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            LawSampler::ShiftedLognormal(ln) => ln.sample(rng) - 1.0,
            LawSampler::Degenerate(c) => *c,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JumpSampler {
    laws: Vec<LawSampler>,
}

impl JumpSampler {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, l: usize, rng: &mut R) -> f64 {
        self.laws[l].sample(rng)
    }
}

/// Precomputed market data for repeated evaluation of `ẐᵀΓ⁻¹Ẑ` and `Γ⁻¹Ẑ`.
#[derive(Debug, Clone)]
pub struct Coefficients {
    k: usize,
    cov: Vec<f64>,
    premium: Vec<f64>,
    columns: Vec<Vec<f64>>,
    jump_mean: Vec<f64>,
    jump_second: Vec<f64>,
}

impl Coefficients {
    pub fn assets(&self) -> usize {
        self.k
    }

    /// `ẐᵀΓ⁻¹Ẑ` at `(lambda, u)`.
    #[inline]
    pub fn quad_form(&self, lambda: &[f64], u: &[f64]) -> Result<f64> {
        if self.k == 1 {
            let (g, z) = self.scalar(lambda, u)?;
            return Ok(z * z / g);
        }
        let (gamma, zhat) = self.assemble(lambda, u);
        let chol = Self::factor(gamma)?;
        let y = chol.solve(&zhat);
        Ok(zhat.dot(&y))
    }

    /// `Γ⁻¹Ẑ` at `(lambda, u)`; the efficient control is this vector times minus the shifted wealth.
    pub fn control_direction(&self, lambda: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.k];
        self.control_direction_into(lambda, u, &mut out)?;
        Ok(out)
    }

    /// [`Self::control_direction`] written into `out` (length `k`).
    #[inline]
    pub fn control_direction_into(&self, lambda: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
        if self.k == 1 {
            let (g, z) = self.scalar(lambda, u)?;
            out[0] = z / g;
            return Ok(());
        }
        let (gamma, zhat) = self.assemble(lambda, u);
        let chol = Self::factor(gamma)?;
        out.copy_from_slice(chol.solve(&zhat).as_slice());
        Ok(())
    }

    #[inline]
    fn scalar(&self, lambda: &[f64], u: &[f64]) -> Result<(f64, f64)> {
        let mut g = self.cov[0];
        let mut z = self.premium[0];
        for (l, col) in self.columns.iter().enumerate() {
            let j = col[0];
            g += (u[l] + 1.0) * lambda[l] * self.jump_second[l] * j * j;
            z += lambda[l] * self.jump_mean[l] * u[l] * j;
        }
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::IllConditioned {
                condition: f64::INFINITY,
            });
        }
        Ok((g, z))
    }

    fn assemble(&self, lambda: &[f64], u: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let k = self.k;
        let mut gamma = DMatrix::from_row_slice(k, k, &self.cov);
        let mut zhat = DVector::from_column_slice(&self.premium);
        for (l, col) in self.columns.iter().enumerate() {
            let w = (u[l] + 1.0) * lambda[l] * self.jump_second[l];
            let z = lambda[l] * self.jump_mean[l] * u[l];
            for i in 0..k {
                zhat[i] += z * col[i];
                for ip in 0..k {
                    gamma[(i, ip)] += w * col[i] * col[ip];
                }
            }
        }
        (gamma, zhat)
    }

    fn factor(gamma: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        let chol = gamma.cholesky().ok_or(Error::IllConditioned {
            condition: f64::INFINITY,
        })?;
        // (max L_ii / min L_ii)² is a cheap lower bound on the condition number
        let d = chol.l_dirty().diagonal();
        let ratio = d.max() / d.min();
        if ratio * ratio > MAX_CONDITION {
            return Err(Error::IllConditioned {
                condition: ratio * ratio,
            });
        }
        Ok(chol)
    }
}
