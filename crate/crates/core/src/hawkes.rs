//! Multivariate Hawkes process with exponential decay.
//!
//! Component `l` has intensity
//!
//! ```text
//! dλ_l(t) = α_l (λ_l∞ − λ_l(t)) dt + Σ_j β_lj dN_j(t)
//! ```
//!
//! so between events every component relaxes deterministically towards its
//! long-run level and an event of component `j` lifts `λ_l` by `β_lj`.
//! Intensities are left-continuous: the value reported at an event time
//! excludes that event's own kick.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, PathRng};

/// Hard cap on the number of events a single path may generate.
pub const EVENT_CAP: usize = 1_000_000;

/// Relative tolerance used when checking that a horizon is a multiple of a time step.
pub const STEP_DIVISIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HawkesParams {
    /// Initial intensities λ(0).
    pub lambda0: Vec<f64>,
    /// Mean-reversion levels λ∞.
    pub lambda_inf: Vec<f64>,
    /// Mean-reversion speeds (diagonal of α).
    pub alpha: Vec<f64>,
    /// `beta[l][j]`: increment of λ_l when N_j jumps.
    pub beta: Vec<Vec<f64>>,
}

impl HawkesParams {
    pub fn new(lambda0: Vec<f64>, lambda_inf: Vec<f64>, alpha: Vec<f64>, beta: Vec<Vec<f64>>) -> Result<Self> {
        let p = Self {
            lambda0,
            lambda_inf,
            alpha,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn univariate(lambda0: f64, lambda_inf: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(vec![lambda0], vec![lambda_inf], vec![alpha], vec![vec![beta]])
    }

    /// Number of jump components `m`.
    pub fn dim(&self) -> usize {
        self.lambda0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.lambda0.len();
        if m == 0 {
            return Err(Error::param("hawkes.lambda0", "at least one component required"));
        }
        for (key, v) in [("hawkes.lambda_inf", &self.lambda_inf), ("hawkes.alpha", &self.alpha)] {
            if v.len() != m {
                return Err(Error::param(key, format!("expected {m} entries, got {}", v.len())));
            }
        }
        if self.beta.len() != m || self.beta.iter().any(|row| row.len() != m) {
            return Err(Error::param("hawkes.beta", format!("expected a {m}x{m} matrix")));
        }
        for l in 0..m {
            if !(self.lambda0[l].is_finite() && self.lambda0[l] > 0.0) {
                return Err(Error::param("hawkes.lambda0", "entries must be finite and > 0"));
            }
            if !(self.alpha[l].is_finite() && self.alpha[l] > 0.0) {
                return Err(Error::param("hawkes.alpha", "entries must be finite and > 0"));
            }
            if !(self.lambda_inf[l].is_finite() && self.lambda_inf[l] >= 0.0) {
                return Err(Error::param("hawkes.lambda_inf", "entries must be finite and >= 0"));
            }
            if self.beta[l].iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
                return Err(Error::param("hawkes.beta", "entries must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Same process started from a different initial intensity.
    pub fn with_lambda0(&self, lambda0: Vec<f64>) -> Result<Self> {
        Self::new(lambda0, self.lambda_inf.clone(), self.alpha.clone(), self.beta.clone())
    }

    /// Column `j` of β: the intensity kick caused by an event of component `j`.
    pub fn beta_column(&self, j: usize) -> Vec<f64> {
        self.beta.iter().map(|row| row[j]).collect()
    }

    pub fn is_poisson(&self) -> bool {
        self.beta.iter().flatten().all(|b| *b == 0.0)
    }

    /// Spectral radius of β·α⁻¹. Values ≥ 1 indicate a possibly explosive process.
    pub fn branching_ratio(&self) -> f64 {
        let m = self.dim();
        if m == 1 {
            return self.beta[0][0] / self.alpha[0];
        }
        let k = DMatrix::from_fn(m, m, |l, j| self.beta[l][j] / self.alpha[j]);
        k.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Logs a warning when the branching ratio is at least one. Returns the ratio.
    pub fn check_stability(&self) -> f64 {
        let rho = self.branching_ratio();
        if rho >= 1.0 {
            log::warn!(
                "Hawkes branching ratio {rho:.3} >= 1: the intensity may explode; \
                 paths are capped at {EVENT_CAP} events"
            );
        }
        rho
    }

    /// Deterministic relaxation of component `l` from `x` over a time `h` without events.
    #[inline]
    pub fn decay(&self, l: usize, x: f64, h: f64) -> f64 {
        let e = (-self.alpha[l] * h).exp();
        e * x + (1.0 - e) * self.lambda_inf[l]
    }

    /// ∫₀ʰ λ_l du along the event-free relaxation from `x`.
    #[inline]
    fn decay_integral(&self, l: usize, x: f64, h: f64) -> f64 {
        let a = self.alpha[l];
        let inf = self.lambda_inf[l];
        inf * h + (x - inf) * (1.0 - (-a * h).exp()) / a
    }

    /// One step of the Euler–Bernoulli scheme.
    ///
    /// Draws one uniform per component (always, so that coupled streams stay
    /// aligned), sets `jumps[j]` when component `j` fires, and advances `lam`
    /// in place. `time` is only used for error reporting.
    #[inline]
    pub fn euler_step<R: Rng + ?Sized>(
        &self,
        lam: &mut [f64],
        jumps: &mut [bool],
        dt: f64,
        time: f64,
        rng: &mut R,
    ) -> Result<()> {
        let mut uniforms = [0.0; 8];
        let m = lam.len();
        if m > uniforms.len() {
            let u: Vec<f64> = (0..m).map(|_| rng.gen()).collect();
            return self.euler_step_uniform(lam, jumps, &u, dt, time);
        }
        for u in uniforms.iter_mut().take(m) {
            *u = rng.gen();
        }
        self.euler_step_uniform(lam, jumps, &uniforms[..m], dt, time)
    }

    /// Euler–Bernoulli step driven by pre-drawn uniforms: component `j` fires when
    /// `uniforms[j] < λ_j dt`.
    #[inline]
    pub fn euler_step_uniform(
        &self,
        lam: &mut [f64],
        jumps: &mut [bool],
        uniforms: &[f64],
        dt: f64,
        time: f64,
    ) -> Result<()> {
        let m = lam.len();
        for j in 0..m {
            let prob = (lam[j] * dt).max(0.0);
            if prob > 1.0 {
                return Err(Error::StepTooLarge {
                    component: j,
                    time,
                    prob,
                });
            }
            jumps[j] = uniforms[j] < prob;
        }
        for l in 0..m {
            let mut next = lam[l] + self.alpha[l] * (self.lambda_inf[l] - lam[l]) * dt;
            for j in 0..m {
                if jumps[j] {
                    next += self.beta[l][j];
                }
            }
            lam[l] = next;
        }
        Ok(())
    }
}

/// A simulated trajectory of the counting process and its intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityPath {
    pub horizon: f64,
    pub lambda0: Vec<f64>,
    /// Event times in `[0, horizon]`, nondecreasing (strictly increasing for exact paths).
    pub times: Vec<f64>,
    /// Zero-based component index of each event.
    pub marks: Vec<usize>,
    pub grid_times: Vec<f64>,
    /// Left-continuous intensity at each grid time, `[step][component]`.
    pub grid_intensity: Vec<Vec<f64>>,
}

impl IntensityPath {
    pub fn dim(&self) -> usize {
        self.lambda0.len()
    }

    /// Left-continuous intensity at `t`, rebuilt from the event list.
    pub fn intensity_at(&self, params: &HawkesParams, t: f64) -> Vec<f64> {
        let m = self.dim();
        let mut lam = self.lambda0.clone();
        let mut s = 0.0;
        for (&tau, &j) in self.times.iter().zip(&self.marks) {
            if tau >= t {
                break;
            }
            for l in 0..m {
                lam[l] = params.decay(l, lam[l], tau - s) + params.beta[l][j];
            }
            s = tau;
        }
        for (l, x) in lam.iter_mut().enumerate() {
            *x = params.decay(l, *x, t - s);
        }
        lam
    }

    /// N(t): number of events of each component in `[0, t]`.
    pub fn counts_at(&self, t: f64) -> Vec<usize> {
        let mut n = vec![0; self.dim()];
        for (&tau, &j) in self.times.iter().zip(&self.marks) {
            if tau > t {
                break;
            }
            n[j] += 1;
        }
        n
    }

    /// ∫₀ᵗ λ_l(u) du for every component, in closed form.
    pub fn compensator(&self, params: &HawkesParams, t: f64) -> Vec<f64> {
        let m = self.dim();
        let mut lam = self.lambda0.clone();
        let mut acc = vec![0.0; m];
        let mut s = 0.0;
        for (&tau, &j) in self.times.iter().zip(&self.marks) {
            if tau >= t {
                break;
            }
            for l in 0..m {
                acc[l] += params.decay_integral(l, lam[l], tau - s);
                lam[l] = params.decay(l, lam[l], tau - s) + params.beta[l][j];
            }
            s = tau;
        }
        for l in 0..m {
            acc[l] += params.decay_integral(l, lam[l], t - s);
        }
        acc
    }

    /// N_l(T) − ∫₀ᵀ λ_l du, the compensated count at the horizon.
    pub fn compensated_counts(&self, params: &HawkesParams) -> Vec<f64> {
        let n = self.counts_at(self.horizon);
        let c = self.compensator(params, self.horizon);
        n.iter().zip(c).map(|(&n, c)| n as f64 - c).collect()
    }
}

/// Number of steps of size `dt` in `horizon`, rejecting non-integral ratios.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::param("horizon", "must be finite and > 0"));
    }
    if !(dt.is_finite() && dt > 0.0 && dt <= horizon) {
        return Err(Error::param("dt", "must satisfy 0 < dt <= horizon"));
    }
    let ratio = horizon / dt;
    let n = ratio.round();
    if (ratio - n).abs() > STEP_DIVISIBILITY_TOL * ratio.max(1.0) {
        return Err(Error::param(
            "dt",
            format!("horizon {horizon} is not an integer multiple of dt {dt}"),
        ));
    }
    Ok(n as usize)
}

/// Exact simulation by Ogata thinning, seeded from `seed`.
pub fn simulate_exact(params: &HawkesParams, horizon: f64, seed: u64) -> Result<IntensityPath> {
    let mut rng = rng::stream(seed, rng::domain::HAWKES, 0, 0);
    simulate_exact_with(params, horizon, None, &mut rng)
}

/// Exact simulation by Ogata thinning with a caller-supplied generator.
///
/// Between events the intensity relaxes monotonically towards λ∞, so
/// `Σ_l max(λ_l(s+), λ_l∞)` dominates the total intensity on the whole
/// remaining interval and the thinning bound is exact. When `grid_dt` is
/// given the left-continuous intensity is also recorded on that grid.
pub fn simulate_exact_with<R: Rng + ?Sized>(
    params: &HawkesParams,
    horizon: f64,
    grid_dt: Option<f64>,
    rng: &mut R,
) -> Result<IntensityPath> {
    params.validate()?;
    let grid_times: Vec<f64> = match grid_dt {
        Some(dt) => {
            let n = step_count(horizon, dt)?;
            (0..=n).map(|k| k as f64 * dt).collect()
        }
        None => {
            if !(horizon.is_finite() && horizon > 0.0) {
                return Err(Error::param("horizon", "must be finite and > 0"));
            }
            Vec::new()
        }
    };
    let m = params.dim();
    let mut lam = params.lambda0.clone();
    let mut t = 0.0;
    let mut times = Vec::new();
    let mut marks = Vec::new();
    let mut grid_intensity = Vec::with_capacity(grid_times.len());
    let mut next_grid = 0usize;

    // Records grid values falling in [t, upto) by relaxing from the current state.
    let flush = |upto: f64, t: f64, lam: &[f64], out: &mut Vec<Vec<f64>>, next: &mut usize, inclusive: bool| {
        while *next < grid_times.len() && (grid_times[*next] < upto || (inclusive && grid_times[*next] <= upto)) {
            let h = grid_times[*next] - t;
            out.push((0..m).map(|l| params.decay(l, lam[l], h)).collect());
            *next += 1;
        }
    };

    loop {
        let bound: f64 = (0..m).map(|l| lam[l].max(params.lambda_inf[l])).sum();
        if bound <= 0.0 {
            break;
        }
        let u: f64 = rng.gen();
        let wait = -(1.0 - u).ln() / bound;
        let cand = t + wait;
        if cand > horizon {
            break;
        }
        let lam_c: Vec<f64> = (0..m).map(|l| params.decay(l, lam[l], wait)).collect();
        let total: f64 = lam_c.iter().sum();
        let v: f64 = rng.gen::<f64>() * bound;
        if v <= total {
            // grid points strictly before the event see the pre-event state,
            // and a grid point at the event time itself is left-continuous.
            flush(cand, t, &lam, &mut grid_intensity, &mut next_grid, true);
            let mut j = m - 1;
            let mut cum = 0.0;
            for (l, x) in lam_c.iter().enumerate() {
                cum += x;
                if v <= cum {
                    j = l;
                    break;
                }
            }
            if times.len() >= EVENT_CAP {
                return Err(Error::EventCapExceeded { cap: EVENT_CAP });
            }
            times.push(cand);
            marks.push(j);
            lam = lam_c;
            for l in 0..m {
                lam[l] += params.beta[l][j];
            }
        } else {
            flush(cand, t, &lam, &mut grid_intensity, &mut next_grid, false);
            lam = lam_c;
        }
        t = cand;
    }
    flush(f64::INFINITY, t, &lam, &mut grid_intensity, &mut next_grid, true);

    Ok(IntensityPath {
        horizon,
        lambda0: params.lambda0.clone(),
        times,
        marks,
        grid_times,
        grid_intensity,
    })
}

/// Euler–Bernoulli discretization: on each step of size `dt`, component `j`
/// fires with probability `λ_j dt` and the intensity follows
/// `λ ← λ + α(λ∞ − λ)dt + β·I`.
///
/// An event fired during step `[t_k, t_{k+1})` is stamped at `t_k`, so the
/// left-continuous grid value at `t_{k+1}` already carries its kick.
pub fn simulate_discretized(params: &HawkesParams, horizon: f64, dt: f64, seed: u64) -> Result<IntensityPath> {
    let mut rng = rng::stream(seed, rng::domain::HAWKES, 1, 0);
    simulate_discretized_with(params, horizon, dt, &mut rng)
}

pub fn simulate_discretized_with(
    params: &HawkesParams,
    horizon: f64,
    dt: f64,
    rng: &mut PathRng,
) -> Result<IntensityPath> {
    params.validate()?;
    let n = step_count(horizon, dt)?;
    let m = params.dim();
    let mut lam = params.lambda0.clone();
    let mut jumps = vec![false; m];
    let mut times = Vec::new();
    let mut marks = Vec::new();
    let mut grid_times = Vec::with_capacity(n + 1);
    let mut grid_intensity = Vec::with_capacity(n + 1);
    grid_times.push(0.0);
    grid_intensity.push(lam.clone());
    for k in 0..n {
        let t = k as f64 * dt;
        params.euler_step(&mut lam, &mut jumps, dt, t, rng)?;
        for (j, &fired) in jumps.iter().enumerate() {
            if fired {
                if times.len() >= EVENT_CAP {
                    return Err(Error::EventCapExceeded { cap: EVENT_CAP });
                }
                times.push(t);
                marks.push(j);
            }
        }
        grid_times.push((k + 1) as f64 * dt);
        grid_intensity.push(lam.clone());
    }
    Ok(IntensityPath {
        horizon,
        lambda0: params.lambda0.clone(),
        times,
        marks,
        grid_times,
        grid_intensity,
    })
}

/// E[λ(t)], from the linear moment equation `dE/dt = αλ∞ + (β − α)E`.
///
/// Solved with the exponential of the augmented generator
/// `[[β − α, αλ∞], [0, 0]]`, which stays well defined when `β − α` is singular.
pub fn expected_intensity(params: &HawkesParams, t: f64) -> Result<Vec<f64>> {
    params.validate()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param("t", "must be finite and >= 0"));
    }
    let m = params.dim();
    let mut gen = DMatrix::<f64>::zeros(m + 1, m + 1);
    for l in 0..m {
        for j in 0..m {
            gen[(l, j)] = params.beta[l][j] * t;
        }
        gen[(l, l)] -= params.alpha[l] * t;
        gen[(l, m)] = params.alpha[l] * params.lambda_inf[l] * t;
    }
    let e = gen.exp();
    Ok((0..m)
        .map(|l| (0..m).map(|j| e[(l, j)] * params.lambda0[j]).sum::<f64>() + e[(l, m)])
        .collect())
}
