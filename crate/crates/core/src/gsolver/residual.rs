use super::table::GTable;
use crate::error::Result;
use crate::hawkes::HawkesParams;
use crate::market::MarketParams;

/// Summary of the discrete PDE residual over interior grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub points: usize,
    pub max_abs: f64,
    pub mean_abs: f64,
    /// Mean of |ẐᵀΓ⁻¹Ẑ| over the same points, for scale.
    pub mean_rhs: f64,
}

/// Residual of `g_t + g_λᵀ α(λ∞ − λ) + Uᵀλ − ẐᵀΓ⁻¹Ẑ` with `g = ln g̃`, using
/// central differences in t and λ and U read off the surface.
///
/// Points need both time neighbours and both spatial neighbours in every
/// component; everything else is skipped.
pub fn pde_residual(table: &GTable, hawkes: &HawkesParams, market: &MarketParams) -> Result<ResidualReport> {
    let m = hawkes.dim();
    let coeffs = market.coefficients();
    let dt = table.dt();
    let mut points = 0usize;
    let mut max_abs = 0.0f64;
    let mut sum_abs = 0.0;
    let mut sum_rhs = 0.0;
    let n = table.slices.len();
    for i in 1..n.saturating_sub(1) {
        let (prev, cur, next) = (&table.slices[i - 1], &table.slices[i], &table.slices[i + 1]);
        let step = cur.grid.step;
        'node: for idx in 0..cur.values.len() {
            let lattice = cur.grid.lattice_index(idx);
            let (Some(ip), Some(inx)) = (prev.grid.flat_index(&lattice), next.grid.flat_index(&lattice)) else {
                continue;
            };
            let lam = cur.grid.node(idx);
            let g = cur.values[idx].ln();
            let g_t = (next.values[inx].ln() - prev.values[ip].ln()) / (2.0 * dt);
            let mut drift = 0.0;
            for l in 0..m {
                let mut up = lattice.clone();
                let mut down = lattice.clone();
                up[l] += 1;
                down[l] -= 1;
                let (Some(iu), Some(id)) = (cur.grid.flat_index(&up), cur.grid.flat_index(&down)) else {
                    continue 'node;
                };
                let g_l = (cur.values[iu].ln() - cur.values[id].ln()) / (2.0 * step);
                drift += g_l * hawkes.alpha[l] * (hawkes.lambda_inf[l] - lam[l]);
            }
            let mut u = vec![0.0; m];
            let mut jump = 0.0;
            for l in 0..m {
                let shifted: Vec<f64> = lam.iter().zip(hawkes.beta_column(l)).map(|(x, b)| x + b).collect();
                u[l] = (cur.interpolate(&shifted).0.ln() - g).exp() - 1.0;
                jump += u[l] * lam[l];
            }
            let rhs = coeffs.quad_form(&lam, &u)?;
            let r = (g_t + drift + jump - rhs).abs();
            points += 1;
            max_abs = max_abs.max(r);
            sum_abs += r;
            sum_rhs += rhs.abs();
        }
    }
    let denom = points.max(1) as f64;
    Ok(ResidualReport {
        points,
        max_abs,
        mean_abs: sum_abs / denom,
        mean_rhs: sum_rhs / denom,
    })
}
