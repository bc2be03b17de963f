//! Forward simulation of terminal wealth under the efficient strategy.
//!
//! The wealth equation is integrated in discounted form `Y = e^{−rt}X`:
//!
//! ```text
//! dY = e^{−rt} πᵀ ( B dt + σ dW + Σ_l J_·l (Z_l dN_l − E[Z_l] λ_l dt) )
//! ```
//!
//! Hawkes events are simulated exactly. Between events an Euler step of at
//! most `dt` carries the drift, compensator and diffusion; at each event the
//! jump is applied with the control and intensity just before it.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontier::{Scratch, StrategyField};
use crate::hawkes::{simulate_exact_with, step_count};
use crate::market::JumpSampler;
use crate::rng::{domain, stream, PathRng};

/// Paths with `|X|` above this are counted as numerical blow-ups.
pub const BLOW_UP: f64 = 1e12;
/// The run is aborted when more than this fraction of paths blow up.
pub const MAX_BLOW_UP_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WealthSettings {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

impl Default for WealthSettings {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            dt: 0.002,
            seed: 0,
        }
    }
}

/// Sample statistics of X(T).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WealthSummary {
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    /// Paths that entered the statistics.
    pub n_paths: usize,
    pub blown_up: usize,
}

/// Simulates X(T) on `settings.n_paths` independent paths starting from `x0`.
pub fn simulate_wealth(strategy: &StrategyField<'_>, x0: f64, settings: &WealthSettings) -> Result<WealthSummary> {
    if settings.n_paths < 2 {
        return Err(Error::param("wealth.n_paths", "need at least 2 paths"));
    }
    if !(x0.is_finite()) {
        return Err(Error::param("frontier.x0", "must be finite"));
    }
    let horizon = strategy.horizon;
    step_count(horizon, settings.dt)?;
    strategy.hawkes.validate()?;
    strategy.market.validate()?;
    let sampler = strategy.market.jump_sampler()?;

    let terminal: Vec<Result<Option<f64>>> = (0..settings.n_paths)
        .into_par_iter()
        .map(|p| simulate_path(strategy, &sampler, x0, settings, p as u64))
        .collect();

    let mut values = Vec::with_capacity(settings.n_paths);
    let mut blown_up = 0;
    for v in terminal {
        match v? {
            Some(x) => values.push(x),
            None => blown_up += 1,
        }
    }
    if blown_up as f64 > MAX_BLOW_UP_FRACTION * settings.n_paths as f64 {
        return Err(Error::WealthBlowUp {
            blown_up,
            n_paths: settings.n_paths,
        });
    }
    if blown_up > 0 {
        log::warn!(
            "{blown_up} of {} wealth paths blew up and were dropped",
            settings.n_paths
        );
    }
    if values.len() < 2 {
        return Err(Error::WealthBlowUp {
            blown_up,
            n_paths: settings.n_paths,
        });
    }
    Ok(summarize(&values, blown_up))
}

fn simulate_path(
    strategy: &StrategyField<'_>,
    sampler: &JumpSampler,
    x0: f64,
    settings: &WealthSettings,
    p: u64,
) -> Result<Option<f64>> {
    let hawkes = &strategy.hawkes;
    let market = &strategy.market;
    let horizon = strategy.horizon;
    let r = market.r;
    let (k, n, m) = (market.assets(), market.brownian_dim(), market.jump_dim());

    let mut ev_rng = stream(settings.seed, domain::WEALTH_EVENTS, p, 0);
    let events = simulate_exact_with(hawkes, horizon, None, &mut ev_rng)?;
    let mut rng = stream(settings.seed, domain::WEALTH, p, 0);

    let mut work = Work {
        scratch: Scratch::new(m),
        dir: vec![0.0; k],
        dw: vec![0.0; n],
    };
    let mut lam = hawkes.lambda0.clone();
    let mut y = x0;
    let mut t = 0.0;
    let mut next_event = 0;

    let steps = (horizon / settings.dt).round() as usize;
    for step in 1..=steps {
        let t_end = if step == steps {
            horizon
        } else {
            step as f64 * settings.dt
        };
        while next_event < events.times.len() && events.times[next_event] <= t_end {
            let tau = events.times[next_event];
            let j = events.marks[next_event];
            work.advance(strategy, t, tau - t, &mut y, &lam, &mut rng)?;
            for l in 0..m {
                lam[l] = hawkes.decay(l, lam[l], tau - t);
            }
            t = tau;
            // jump with π(τ−), λ(τ−)
            let gap = strategy.discounted_gap(y);
            let z = sampler.sample(j, &mut rng);
            if gap != 0.0 {
                strategy.direction_into(t, &lam, &mut work.scratch, &mut work.dir)?;
                let s: f64 = (0..k).map(|i| work.dir[i] * market.jump_scale[i][j]).sum();
                y -= gap * s * z;
            }
            for l in 0..m {
                lam[l] += hawkes.beta[l][j];
            }
            next_event += 1;
        }
        work.advance(strategy, t, t_end - t, &mut y, &lam, &mut rng)?;
        for l in 0..m {
            lam[l] = hawkes.decay(l, lam[l], t_end - t);
        }
        t = t_end;
        if !(y.abs() <= BLOW_UP) {
            return Ok(None);
        }
    }
    let x = y * (r * horizon).exp();
    if !(x.abs() <= BLOW_UP) {
        return Ok(None);
    }
    Ok(Some(x))
}

struct Work {
    scratch: Scratch,
    dir: Vec<f64>,
    dw: Vec<f64>,
}

impl Work {
    /// Continuous part over `[t, t + h]` with the control frozen at `t`.
    fn advance(
        &mut self,
        strategy: &StrategyField<'_>,
        t: f64,
        h: f64,
        y: &mut f64,
        lam: &[f64],
        rng: &mut PathRng,
    ) -> Result<()> {
        let gap = strategy.discounted_gap(*y);
        if h <= 0.0 || gap == 0.0 {
            return Ok(());
        }
        let market = &strategy.market;
        strategy.direction_into(t, lam, &mut self.scratch, &mut self.dir)?;
        let sq = h.sqrt();
        for w in self.dw.iter_mut() {
            *w = sq * rng.sample::<f64, _>(StandardNormal);
        }
        // discounted control e^{−rt}π = −dir · gap
        let mut incr = 0.0;
        for (i, d) in self.dir.iter().enumerate() {
            let mut e = market.mu[i] - market.r;
            for (l, x) in lam.iter().enumerate() {
                e -= market.jump_scale[i][l] * market.jump_mean[l] * x;
            }
            let mut s = e * h;
            for (j, w) in self.dw.iter().enumerate() {
                s += market.sigma[i][j] * w;
            }
            incr -= d * s;
        }
        *y += gap * incr;
        Ok(())
    }
}

/// Compensated summation.
#[derive(Debug, Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

fn summarize(values: &[f64], blown_up: usize) -> WealthSummary {
    let n = values.len() as f64;
    let mut s = Kahan::default();
    values.iter().for_each(|&x| s.add(x));
    let mean = s.sum / n;
    let (mut s2, mut s4) = (Kahan::default(), Kahan::default());
    for &x in values {
        let d = (x - mean) * (x - mean);
        s2.add(d);
        s4.add(d * d);
    }
    let m2 = s2.sum / n;
    let m4 = s4.sum / n;
    let variance = s2.sum / (n - 1.0);
    WealthSummary {
        mean,
        variance,
        se_mean: (variance / n).sqrt(),
        se_variance: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
        n_paths: values.len(),
        blown_up,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hawkes::HawkesParams;
    use crate::market::MarketParams;
    use approx::assert_relative_eq;

    #[test]
    fn riskless_target_is_deterministic() {
        let h = HawkesParams::univariate(0.48, 0.48, 5.0, 0.0).unwrap();
        let floor = (0.04f64).exp();
        let s = StrategyField::poisson(&h, &MarketParams::reference(), 1.0, floor, 2.0).unwrap();
        let out = simulate_wealth(
            &s,
            1.0,
            &WealthSettings {
                n_paths: 50,
                dt: 0.01,
                seed: 3,
            },
        )
        .unwrap();
        assert_relative_eq!(out.mean, floor, epsilon = 1e-14);
        assert_eq!(out.variance, 0.0);
    }

    #[test]
    fn summary_statistics() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let s = summarize(&v, 0);
        assert_relative_eq!(s.mean, 2.5);
        assert_relative_eq!(s.variance, 5.0 / 3.0);
        assert_relative_eq!(s.se_mean, (5.0f64 / 12.0).sqrt());
        // central moments 1.25 and 2.5625
        assert_relative_eq!(s.se_variance, ((2.5625f64 - 1.5625) / 4.0).sqrt());
    }

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = Kahan::default();
        k.add(1e16);
        for _ in 0..1000 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.sum, 1000.0);
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let h = HawkesParams::univariate(0.48, 0.48, 5.0, 0.0).unwrap();
        let s = StrategyField::poisson(&h, &MarketParams::reference(), 1.0, 1.2, 2.0).unwrap();
        let cfg = WealthSettings {
            n_paths: 200,
            dt: 0.01,
            seed: 9,
        };
        let a = simulate_wealth(&s, 1.0, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| simulate_wealth(&s, 1.0, &cfg)).unwrap();
        assert_eq!(a, b);
    }
}
