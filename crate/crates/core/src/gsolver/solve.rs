use rand::Rng;
use rayon::prelude::*;

use super::grid::build_grids;
use super::table::{hawkes_hash, market_hash, GTable, Slice, TableMeta, FORMAT_VERSION};
use super::{SolverSettings, TimeQuadrature};
use crate::error::{Error, Result};
use crate::hawkes::{step_count, HawkesParams};
use crate::market::{Coefficients, MarketParams};
use crate::rng;

const MAX_DIM: usize = 2;

/// Smallest block of nodes handed to one worker.
const NODE_CHUNK: usize = 8;

/// Tolerance in standard errors before a value above one counts as divergence.
const DIVERGENCE_SE: f64 = 3.0;

struct Integrand<'a> {
    hawkes: &'a HawkesParams,
    coeffs: Coefficients,
    /// Columns β_(l); `None` when the column is zero and U_l ≡ 0.
    shifts: Vec<Option<Vec<f64>>>,
}

impl Integrand<'_> {
    /// g̃ Ẑᵀ Γ⁻¹ Ẑ on `slice` at `lam`.
    #[inline]
    fn eval(&self, slice: &Slice, lam: &[f64], clamps: &mut u64) -> Result<f64> {
        let m = lam.len();
        let (g, c) = slice.interpolate(lam);
        *clamps += c as u64;
        if !(g > 0.0) {
            return Err(Error::SolverDivergence {
                time: slice.time,
                lambda: lam.to_vec(),
                value: g,
                tol: 0.0,
            });
        }
        let mut u = [0.0; MAX_DIM];
        let mut shifted = [0.0; MAX_DIM];
        for l in 0..m {
            if let Some(col) = &self.shifts[l] {
                for i in 0..m {
                    shifted[i] = lam[i] + col[i];
                }
                let (gs, c) = slice.interpolate(&shifted[..m]);
                *clamps += c as u64;
                u[l] = gs / g - 1.0;
            }
        }
        Ok(g * self.coeffs.quad_form(lam, &u[..m])?)
    }
}

/// Solves for g̃ on the backward time grid described by `settings`.
///
/// For every node `(t_i, λ_j)` the solver runs `settings.paths` Euler–Bernoulli
/// intensity paths from `t_i` to `T` and averages `1 − Δt Σ_k f(t_k, λ(t_k))`,
/// with `f = g̃ ẐᵀΓ⁻¹Ẑ` read off the already-solved later slices. Paths share
/// their random numbers across the nodes of a slice, which keeps the surface
/// smooth in λ.
pub fn solve_g(hawkes: &HawkesParams, market: &MarketParams, settings: &SolverSettings) -> Result<GTable> {
    hawkes.validate()?;
    market.validate()?;
    let m = hawkes.dim();
    if m > MAX_DIM {
        return Err(Error::Unsupported(format!(
            "the grid solver handles at most {MAX_DIM} jump components (got {m})"
        )));
    }
    if market.jump_dim() != m {
        return Err(Error::param(
            "market.jump_mean",
            format!(
                "market has {} jump components, Hawkes process has {m}",
                market.jump_dim()
            ),
        ));
    }
    if settings.paths < 2 {
        return Err(Error::param("solver.paths", "need at least 2 paths per grid point"));
    }
    hawkes.check_stability();
    if m == 2 {
        log::warn!("bivariate solve: cost grows with the square of the spatial grid and may be very slow");
    }

    let n = step_count(settings.horizon, settings.dt)?;
    let dt = settings.dt;
    let grids = build_grids(
        hawkes,
        n,
        dt,
        settings.dlam,
        settings.lam_lo,
        settings.lam_hi,
        settings.cap(),
        settings.max_points,
    )?;

    let integrand = Integrand {
        hawkes,
        coeffs: market.coefficients(),
        shifts: (0..m)
            .map(|l| {
                let col = hawkes.beta_column(l);
                col.iter().any(|b| *b != 0.0).then_some(col)
            })
            .collect(),
    };

    let scalar = (m == 1 && market.assets() == 1).then(|| Scalar::new(hawkes, market));

    let mut slices: Vec<Slice> = grids
        .into_iter()
        .enumerate()
        .map(|(i, grid)| {
            let len = grid.len();
            Slice {
                time: settings.horizon * i as f64 / n as f64,
                grid,
                values: vec![1.0; len],
                std_err: vec![0.0; len],
            }
        })
        .collect();

    let paths = settings.paths;
    let mut clamped_total = 0u64;
    for i in (0..n).rev() {
        let steps = n - i;
        // uniforms[(p * steps + s) * m + j]
        let mut uniforms = vec![0.0f64; paths * steps * m];
        uniforms.par_chunks_mut(steps * m).enumerate().for_each(|(p, chunk)| {
            let mut r = rng::stream(settings.seed, rng::domain::SOLVER, i as u64, p as u64);
            for u in chunk.iter_mut() {
                *u = r.gen();
            }
        });

        let later = &slices[i + 1..];
        let grid = &slices[i].grid;
        let nodes: Vec<Vec<f64>> = (0..grid.len()).map(|idx| grid.node(idx)).collect();
        let chunk = NODE_CHUNK.max(nodes.len().div_ceil(4 * rayon::current_num_threads()));
        let results: Vec<(f64, f64, u64)> = nodes
            .par_chunks(chunk)
            .map(|block| match &scalar {
                Some(sc) => sc.estimate(later, block, &uniforms, i, steps, dt, paths, settings.quadrature),
                None => estimate_nodes(
                    &integrand,
                    later,
                    block,
                    &uniforms,
                    i,
                    steps,
                    dt,
                    paths,
                    settings.quadrature,
                ),
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();

        let slice = &mut slices[i];
        for (idx, (mean, se, clamps)) in results.into_iter().enumerate() {
            clamped_total += clamps;
            let tol = DIVERGENCE_SE * se + 1e-12;
            if !(mean >= 0.0 && mean <= 1.0 + tol) {
                return Err(Error::SolverDivergence {
                    time: slice.time,
                    lambda: slice.grid.node(idx),
                    value: mean,
                    tol,
                });
            }
            slice.values[idx] = mean.min(1.0);
            slice.std_err[idx] = se;
        }
        log::debug!("solved slice t = {:.4} ({} nodes)", slice.time, slice.values.len());
    }
    if clamped_total > 0 {
        log::warn!("{clamped_total} lookups fell outside the capped grid and were clamped");
    }

    Ok(GTable {
        meta: TableMeta {
            format_version: FORMAT_VERSION,
            settings: settings.clone(),
            hawkes: hawkes.clone(),
            market: market.clone(),
            hawkes_hash: hawkes_hash(hawkes),
            market_hash: market_hash(market),
            interpolation: "multilinear in lambda, nearest slice in t, clamped outside the grid".into(),
            sampling:
                "euler-bernoulli intensity paths; chacha8 stream per (seed, slice, path) shared by all nodes of a slice"
                    .into(),
            clamped_lookups: clamped_total,
        },
        slices,
    })
}

/// One asset and one jump component: the same scheme as [`estimate_nodes`]
/// with every coefficient unpacked into scalars. Operations are ordered as in
/// the generic path so both give identical results.
struct Scalar {
    alpha: f64,
    lambda_inf: f64,
    beta: f64,
    cov: f64,
    premium: f64,
    scale: f64,
    jump_mean: f64,
    jump_second: f64,
}

impl Scalar {
    fn new(hawkes: &HawkesParams, market: &MarketParams) -> Self {
        Self {
            alpha: hawkes.alpha[0],
            lambda_inf: hawkes.lambda_inf[0],
            beta: hawkes.beta[0][0],
            cov: market.sigma_cov()[(0, 0)],
            premium: market.mu[0] - market.r,
            scale: market.jump_scale[0][0],
            jump_mean: market.jump_mean[0],
            jump_second: market.jump_second[0],
        }
    }

    #[inline(always)]
    fn eval(&self, slice: &Slice, lam: f64, clamps: &mut u64) -> Result<f64> {
        let (g, c) = slice.interpolate(&[lam]);
        *clamps += c as u64;
        if !(g > 0.0) {
            return Err(Error::SolverDivergence {
                time: slice.time,
                lambda: vec![lam],
                value: g,
                tol: 0.0,
            });
        }
        let mut u = 0.0;
        if self.beta != 0.0 {
            let (gs, c) = slice.interpolate(&[lam + self.beta]);
            *clamps += c as u64;
            u = gs / g - 1.0;
        }
        let j = self.scale;
        let mut gamma = self.cov;
        let mut z = self.premium;
        gamma += (u + 1.0) * lam * self.jump_second * j * j;
        z += lam * self.jump_mean * u * j;
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::IllConditioned {
                condition: f64::INFINITY,
            });
        }
        Ok(g * (z * z / gamma))
    }

    #[allow(clippy::too_many_arguments)]
    fn estimate(
        &self,
        later: &[Slice],
        nodes: &[Vec<f64>],
        uniforms: &[f64],
        i: usize,
        steps: usize,
        dt: f64,
        paths: usize,
        quadrature: TimeQuadrature,
    ) -> Result<Vec<(f64, f64, u64)>> {
        let mut clamps = vec![0u64; nodes.len()];
        let start = nodes
            .iter()
            .zip(clamps.iter_mut())
            .map(|(node, c)| match quadrature {
                TimeQuadrature::RightEndpoint => Ok(0.0),
                TimeQuadrature::Trapezoid => Ok(0.5 * self.eval(&later[0], node[0], c)?),
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut mean = vec![0.0; nodes.len()];
        let mut m2 = vec![0.0; nodes.len()];
        let last_weight = if quadrature == TimeQuadrature::Trapezoid {
            0.5
        } else {
            1.0
        };
        for p in 0..paths {
            let path_u = &uniforms[p * steps..(p + 1) * steps];
            for (b, node) in nodes.iter().enumerate() {
                let mut lam = node[0];
                let mut acc = start[b];
                for (s, (&u, slice)) in path_u.iter().zip(later).enumerate() {
                    let prob = (lam * dt).max(0.0);
                    if prob > 1.0 {
                        return Err(Error::StepTooLarge {
                            component: 0,
                            time: (i + s) as f64 * dt,
                            prob,
                        });
                    }
                    let mut next = lam + self.alpha * (self.lambda_inf - lam) * dt;
                    if u < prob {
                        next += self.beta;
                    }
                    lam = next;
                    let f = self.eval(slice, lam, &mut clamps[b])?;
                    acc += if s + 1 == steps { last_weight * f } else { f };
                }
                let value = 1.0 - dt * acc;
                let delta = value - mean[b];
                mean[b] += delta / (p + 1) as f64;
                m2[b] += delta * (value - mean[b]);
            }
        }
        Ok((0..nodes.len())
            .map(|b| {
                let var = m2[b] / (paths - 1) as f64;
                (mean[b], (var / paths as f64).sqrt(), clamps[b])
            })
            .collect())
    }
}

/// Monte Carlo estimates `(mean, standard error, clamped lookups)` for a block
/// of nodes. Paths form the outer loop so each path's uniforms stay in cache
/// while every node of the block consumes them.
#[allow(clippy::too_many_arguments)]
fn estimate_nodes(
    integrand: &Integrand<'_>,
    later: &[Slice],
    nodes: &[Vec<f64>],
    uniforms: &[f64],
    i: usize,
    steps: usize,
    dt: f64,
    paths: usize,
    quadrature: TimeQuadrature,
) -> Result<Vec<(f64, f64, u64)>> {
    let mut clamps = vec![0u64; nodes.len()];
    let mut lam = [0.0; MAX_DIM];
    let mut jumps = [false; MAX_DIM];

    // Deterministic start-point term of the trapezoid rule.
    let start = nodes
        .iter()
        .zip(clamps.iter_mut())
        .map(|(node, c)| match quadrature {
            TimeQuadrature::RightEndpoint => Ok(0.0),
            TimeQuadrature::Trapezoid => Ok(0.5 * integrand.eval(&later[0], node, c)?),
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut mean = vec![0.0; nodes.len()];
    let mut m2 = vec![0.0; nodes.len()];
    for p in 0..paths {
        let path_u = &uniforms[p * steps * m_of(nodes)..(p + 1) * steps * m_of(nodes)];
        for (b, node) in nodes.iter().enumerate() {
            let m = node.len();
            lam[..m].copy_from_slice(node);
            let mut acc = start[b];
            for s in 0..steps {
                let u = &path_u[s * m..(s + 1) * m];
                let time = (i + s) as f64 * dt;
                integrand
                    .hawkes
                    .euler_step_uniform(&mut lam[..m], &mut jumps[..m], u, dt, time)?;
                let f = integrand.eval(&later[s], &lam[..m], &mut clamps[b])?;
                let w = if quadrature == TimeQuadrature::Trapezoid && s + 1 == steps {
                    0.5
                } else {
                    1.0
                };
                acc += w * f;
            }
            let value = 1.0 - dt * acc;
            let delta = value - mean[b];
            mean[b] += delta / (p + 1) as f64;
            m2[b] += delta * (value - mean[b]);
        }
    }
    Ok((0..nodes.len())
        .map(|b| {
            let var = m2[b] / (paths - 1) as f64;
            (mean[b], (var / paths as f64).sqrt(), clamps[b])
        })
        .collect())
}

fn m_of(nodes: &[Vec<f64>]) -> usize {
    nodes.first().map_or(0, |n| n.len())
}
