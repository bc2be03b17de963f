//! Per-slice spatial grids and multilinear interpolation.
//!
//! Nodes of every slice sit on the common lattice `anchor + i·step`, so the
//! same intensity level has the same lattice index in every slice. A slice is
//! a dense rectangle `first[l] .. first[l] + counts[l]` in each component.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hawkes::HawkesParams;

const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub anchor: Vec<f64>,
    pub step: f64,
    /// Lattice index of the first node in each component.
    pub first: Vec<i64>,
    pub counts: Vec<usize>,
}

impl SpatialGrid {
    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate of lattice index `i` in component `l`.
    #[inline]
    pub fn coord(&self, l: usize, i: i64) -> f64 {
        self.anchor[l] + i as f64 * self.step
    }

    pub fn lower(&self, l: usize) -> f64 {
        self.coord(l, self.first[l])
    }

    pub fn upper(&self, l: usize) -> f64 {
        self.coord(l, self.first[l] + self.counts[l] as i64 - 1)
    }

    /// Lattice indices of flat node `idx` (last component varies fastest).
    pub fn lattice_index(&self, mut idx: usize) -> Vec<i64> {
        let m = self.dim();
        let mut out = vec![0; m];
        for l in (0..m).rev() {
            out[l] = self.first[l] + (idx % self.counts[l]) as i64;
            idx /= self.counts[l];
        }
        out
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        self.lattice_index(idx)
            .iter()
            .enumerate()
            .map(|(l, &i)| self.coord(l, i))
            .collect()
    }

    /// Flat index of the node with the given lattice indices, if it belongs to this slice.
    pub fn flat_index(&self, lattice: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for l in 0..self.dim() {
            let off = lattice[l] - self.first[l];
            if off < 0 || off >= self.counts[l] as i64 {
                return None;
            }
            idx = idx * self.counts[l] + off as usize;
        }
        Some(idx)
    }

    /// Position of `x` along component `l`, clamped: `(lower node offset, weight, clamped)`.
    #[inline]
    fn locate(&self, l: usize, x: f64) -> (usize, f64, bool) {
        let n = self.counts[l];
        let pos = (x - self.anchor[l]) / self.step - self.first[l] as f64;
        if pos <= SNAP {
            return (0, 0.0, pos < -SNAP);
        }
        let last = (n - 1) as f64;
        if pos >= last - SNAP {
            return (n - 1, 0.0, pos > last + SNAP);
        }
        // pos > 0 here, so truncation is floor
        let i = pos as usize;
        let w = pos - i as f64;
        if w < SNAP {
            (i, 0.0, false)
        } else if w > 1.0 - SNAP {
            (i + 1, 0.0, false)
        } else {
            (i, w, false)
        }
    }

    /// Multilinear interpolation of `values` at `lambda`. Points outside the
    /// slice are clamped to its boundary; the flag reports whether that happened.
    #[inline]
    pub fn interpolate(&self, values: &[f64], lambda: &[f64]) -> (f64, bool) {
        match self.dim() {
            1 => {
                let (i, w, c) = self.locate(0, lambda[0]);
                let v = if w == 0.0 {
                    values[i]
                } else {
                    (1.0 - w) * values[i] + w * values[i + 1]
                };
                (v, c)
            }
            2 => {
                let (i, wi, ci) = self.locate(0, lambda[0]);
                let (j, wj, cj) = self.locate(1, lambda[1]);
                let n1 = self.counts[1];
                let at = |a: usize, b: usize| values[a * n1 + b];
                let mut v = (1.0 - wi) * (1.0 - wj) * at(i, j);
                if wj > 0.0 {
                    v += (1.0 - wi) * wj * at(i, j + 1);
                }
                if wi > 0.0 {
                    v += wi * (1.0 - wj) * at(i + 1, j);
                    if wj > 0.0 {
                        v += wi * wj * at(i + 1, j + 1);
                    }
                }
                (v, ci || cj)
            }
            _ => self.interpolate_general(values, lambda),
        }
    }

    fn interpolate_general(&self, values: &[f64], lambda: &[f64]) -> (f64, bool) {
        let m = self.dim();
        let located: Vec<_> = (0..m).map(|l| self.locate(l, lambda[l])).collect();
        let clamped = located.iter().any(|x| x.2);
        let mut total = 0.0;
        for corner in 0..(1usize << m) {
            let mut w = 1.0;
            let mut idx = 0usize;
            let mut skip = false;
            for l in 0..m {
                let (i, wl, _) = located[l];
                let up = (corner >> (m - 1 - l)) & 1 == 1;
                if up {
                    if wl == 0.0 {
                        skip = true;
                        break;
                    }
                    w *= wl;
                    idx = idx * self.counts[l] + i + 1;
                } else {
                    w *= 1.0 - wl;
                    idx = idx * self.counts[l] + i;
                }
            }
            if !skip {
                total += w * values[idx];
            }
        }
        (total, clamped)
    }
}

/// Builds the spatial grid of every time slice.
///
/// Slice 0 covers `[lam_lo, lam_hi]` in each component. Going forward one
/// step, the Euler dynamics map `[lo, hi]` into
/// `[lo + α(λ∞ − lo)Δt, hi + α(λ∞ − hi)Δt + Σ_j β_lj]`, and the non-local
/// lookup adds a further `max_j β_lj` on top. Slice `i + 1` therefore covers
/// the union of slice `i` and that envelope, so every state a path can visit,
/// together with its post-jump lookups, lies on the grid unless the growth
/// cap bites.
#[allow(clippy::too_many_arguments)]
pub fn build_grids(
    hawkes: &HawkesParams,
    horizon_steps: usize,
    dt: f64,
    dlam: f64,
    lam_lo: f64,
    lam_hi: f64,
    cap: f64,
    max_points: usize,
) -> Result<Vec<SpatialGrid>> {
    let m = hawkes.dim();
    if !(dlam.is_finite() && dlam > 0.0) {
        return Err(Error::param("solver.dlam", "must be finite and > 0"));
    }
    if !(lam_lo.is_finite() && lam_lo > 0.0 && lam_hi >= lam_lo) {
        return Err(Error::param("solver.lam_lo", "require 0 < lam_lo <= lam_hi"));
    }
    if !(cap >= lam_hi) {
        return Err(Error::param("solver.growth_cap", "must be >= lam_hi"));
    }
    for l in 0..m {
        if hawkes.alpha[l] * dt >= 1.0 {
            return Err(Error::param(
                "solver.dt",
                format!("alpha * dt = {} must be < 1 for the Euler scheme", hawkes.alpha[l] * dt),
            ));
        }
    }
    let anchor = vec![lam_lo; m];
    let index_floor = |x: f64| ((x - lam_lo) / dlam + SNAP).floor() as i64;
    let index_ceil = |x: f64| ((x - lam_lo) / dlam - SNAP).ceil() as i64;
    let cap_index = index_floor(cap);

    let row_sum: Vec<f64> = hawkes.beta.iter().map(|r| r.iter().sum()).collect();
    let row_max: Vec<f64> = hawkes
        .beta
        .iter()
        .map(|r| r.iter().cloned().fold(0.0, f64::max))
        .collect();

    let mut lo = vec![lam_lo; m];
    let mut hi = vec![lam_hi; m];
    let mut grids = Vec::with_capacity(horizon_steps + 1);
    let mut total = 0usize;
    for i in 0..=horizon_steps {
        if i > 0 {
            for l in 0..m {
                let a = hawkes.alpha[l];
                let inf = hawkes.lambda_inf[l];
                let lo_next = lo[l] + a * (inf - lo[l]) * dt;
                let hi_next = hi[l] + a * (inf - hi[l]) * dt + row_sum[l] + row_max[l];
                lo[l] = lo[l].min(lo_next);
                hi[l] = hi[l].max(hi_next);
            }
        }
        let mut first = Vec::with_capacity(m);
        let mut counts = Vec::with_capacity(m);
        for l in 0..m {
            let f = index_floor(lo[l]);
            let last = index_ceil(hi[l]).min(cap_index).max(f);
            first.push(f);
            counts.push((last - f + 1) as usize);
        }
        let grid = SpatialGrid {
            anchor: anchor.clone(),
            step: dlam,
            first,
            counts,
        };
        // paths start from the rounded-out nodes, so the next envelope must too
        for l in 0..m {
            lo[l] = grid.lower(l);
            hi[l] = grid.upper(l);
        }
        total = total.saturating_add(grid.len());
        if total > max_points {
            return Err(Error::Resource(format!(
                "spatial grids exceed {max_points} points (reached slice {i} of {horizon_steps})"
            )));
        }
        if grid.lower(0) <= 0.0 || (0..m).any(|l| grid.lower(l) <= 0.0) {
            return Err(Error::param("solver.lam_lo", "grid reaches non-positive intensities"));
        }
        grids.push(grid);
    }
    Ok(grids)
}
