//! Closed form for deterministic intensities: with β = 0 the non-local PDE
//! collapses to `g′(t) = Bᵀ Γ_P(λ_P(t))⁻¹ B`, `g(T) = 0`.

use crate::error::{Error, Result};
use crate::market::MarketParams;

const MAX_DEPTH: u32 = 40;

/// `g(t) = −∫_t^T Bᵀ Γ_P(λ_P(s))⁻¹ B ds` for a deterministic intensity path.
pub struct PoissonG<F> {
    market: MarketParams,
    lambda_path: F,
    horizon: f64,
    tol: f64,
}

impl<F: Fn(f64) -> Vec<f64>> PoissonG<F> {
    pub fn at(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::param("t", format!("must lie in [0, {}]", self.horizon)));
        }
        if t == self.horizon {
            return Ok(0.0);
        }
        let coeffs = self.market.coefficients();
        let m = self.market.jump_dim();
        let zeros = vec![0.0; m];
        let mut failure = None;
        let integrand = |s: f64| {
            let lam = (self.lambda_path)(s);
            if lam.len() != m || lam.iter().any(|x| !(*x >= 0.0)) {
                failure.get_or_insert_with(|| format!("invalid intensity {lam:?} at s = {s}"));
                return f64::NAN;
            }
            coeffs.quad_form(&lam, &zeros).unwrap_or(f64::NAN)
        };
        let integral = adaptive_simpson(integrand, t, self.horizon, self.tol)?;
        if let Some(msg) = failure {
            return Err(Error::Quadrature(msg));
        }
        Ok(-integral)
    }

    /// `e^{g(t)}`.
    pub fn tilde_at(&self, t: f64) -> Result<f64> {
        Ok(self.at(t)?.exp())
    }
}

/// Builds `t ↦ g(t)` for the intensity path `lambda_path` on `[0, horizon]`.
pub fn poisson_g<F: Fn(f64) -> Vec<f64>>(market: &MarketParams, lambda_path: F, horizon: f64) -> Result<PoissonG<F>> {
    market.validate()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::param("horizon", "must be finite and > 0"));
    }
    Ok(PoissonG {
        market: market.clone(),
        lambda_path,
        horizon,
        tol: 1e-13,
    })
}

/// `g(t)` for a constant intensity: `−(T − t) Bᵀ Γ_P(λ)⁻¹ B`.
pub fn poisson_g_constant(market: &MarketParams, lambda: &[f64], t: f64, horizon: f64) -> Result<f64> {
    let q = market.coefficients().quad_form(lambda, &vec![0.0; lambda.len()])?;
    Ok(-(horizon - t) * q)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<G: FnMut(f64) -> f64>(mut f: G, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let c = 0.5 * (a + b);
    let fc = f(c);
    if !(fa.is_finite() && fb.is_finite() && fc.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
    }
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    let v = recurse(&mut f, a, b, fa, fc, fb, whole, tol, MAX_DEPTH)?;
    if !v.is_finite() {
        return Err(Error::Quadrature("integrand produced a non-finite value".into()));
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn recurse<G: FnMut(f64) -> f64>(
    f: &mut G,
    a: f64,
    b: f64,
    fa: f64,
    fc: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let c = 0.5 * (a + b);
    let d = 0.5 * (a + c);
    let e = 0.5 * (c + b);
    let fd = f(d);
    let fe = f(e);
    if !(fd.is_finite() && fe.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite integrand near {c}")));
    }
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Quadrature(format!("maximum depth reached on [{a}, {b}]")));
    }
    Ok(recurse(f, a, c, fa, fd, fc, left, 0.5 * tol, depth - 1)?
        + recurse(f, c, b, fc, fe, fb, right, 0.5 * tol, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_intensity_reference_values() {
        let mk = MarketParams::reference();
        let g = poisson_g(&mk, |_| vec![0.48], 2.0).unwrap();
        let g0 = g.at(0.0).unwrap();
        assert_relative_eq!(g0, -2.0 * 0.0049 / 0.0688, epsilon = 1e-12);
        assert_relative_eq!(g0, -0.14244, epsilon = 1e-5);
        assert_relative_eq!(g.tilde_at(0.0).unwrap(), 0.8672, epsilon = 1e-4);
        assert_eq!(g.at(2.0).unwrap(), 0.0);
        assert_relative_eq!(poisson_g_constant(&mk, &[0.48], 0.0, 2.0).unwrap(), g0, epsilon = 1e-12);
    }

    #[test]
    fn zero_premium_gives_zero() {
        let mk = MarketParams::univariate(0.02, 0.02, 0.2, 1.0, -0.02, 0.06).unwrap();
        let g = poisson_g(&mk, |s| vec![0.3 + s], 2.0).unwrap();
        assert_eq!(g.at(0.5).unwrap(), 0.0);
    }

    #[test]
    fn decaying_intensity_matches_antiderivative() {
        // λ(s) = λ∞ + (λ₀ − λ∞)e^{−αs}; integrand B²/(σ² + λ(s)E[Z²]).
        let mk = MarketParams::reference();
        let (l0, linf, alpha) = (1.5, 0.48, 5.0);
        let g = poisson_g(&mk, |s| vec![linf + (l0 - linf) * (-alpha * s).exp()], 2.0).unwrap();
        let a = 0.04 + linf * 0.06;
        let b = (l0 - linf) * 0.06;
        // d/ds [ s/a + ln(a + b e^{−αs}) / (aα) ] = 1/(a + b e^{−αs})
        let prim = |s: f64| s / a + (a + b * (-alpha * s).exp()).ln() / (a * alpha);
        let expected = -0.0049 * (prim(2.0) - prim(0.3));
        assert_relative_eq!(g.at(0.3).unwrap(), expected, epsilon = 1e-11);
    }

    #[test]
    fn invalid_path_is_reported() {
        let mk = MarketParams::reference();
        let g = poisson_g(&mk, |s| vec![0.5 - s], 2.0).unwrap();
        assert!(matches!(g.at(0.0), Err(Error::Quadrature(_))));
    }
}
