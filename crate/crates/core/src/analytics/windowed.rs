//! Windowed access: CRIs start with a Poisson number of packets.

use serde::{Deserialize, Serialize};

use super::recursion::CriTable;
use super::{AnalyticsError, SplitParams};

/// Default bound on the truncation error of the Poisson mixture.
pub const DEFAULT_POISSON_TOL: f64 = 1e-12;

/// Chernoff bound on one Poisson tail: `P(N ≥ k)` for `k > μ` or
/// `P(N ≤ k)` for `k < μ`.
fn poisson_tail_bound(mu: f64, k: f64) -> f64 {
    if k == 0.0 {
        return (-mu).exp();
    }
    (-mu + k + k * (mu / k).ln()).exp()
}

/// Summation range `[lo, hi]` outside of which the mixture has mass (weighted
/// by `L_n ≤ 2n + 1`) below `tol / 2` on each side.
fn truncation_range(mu: f64, tol: f64) -> (usize, usize) {
    let sd = mu.sqrt().max(1.0);
    let mut hi = (mu + sd).ceil() as usize + 1;
    // Σ_{n≥hi} (2n+1) P(N=n) = 2μ P(N ≥ hi−1) + P(N ≥ hi)
    while (2.0 * mu + 1.0) * poisson_tail_bound(mu, (hi - 1) as f64) >= tol / 2.0 {
        hi += 1 + (sd / 8.0) as usize;
    }
    let mut lo = (mu - sd).floor().max(0.0) as usize;
    // below lo, L_n ≤ L_lo ≤ 2·lo + 1
    while lo > 0 && (2.0 * lo as f64 + 1.0) * poisson_tail_bound(mu, lo as f64) >= tol / 2.0 {
        lo = lo.saturating_sub(1 + (sd / 8.0) as usize);
    }
    (lo, hi)
}

fn mixture(table: &mut CriTable, mu: f64, tol: f64) -> Result<f64, AnalyticsError> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(AnalyticsError::InvalidLoad(mu));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(AnalyticsError::InvalidTolerance(tol));
    }
    if mu == 0.0 {
        return Ok(1.0);
    }
    let (lo, hi) = truncation_range(mu, tol);
    table.extend_to(hi);
    let ln_mu = mu.ln();
    let mut ln_fact: f64 = (1..=lo).map(|k| (k as f64).ln()).sum();
    let mut sum = 0.0;
    for n in lo..=hi {
        if n > lo {
            ln_fact += (n as f64).ln();
        }
        let w = (-mu + n as f64 * ln_mu - ln_fact).exp();
        sum += w * table.values()[n];
    }
    Ok(sum)
}

/// `E[L_N]` for `N ~ Poisson(load)`, truncated once the neglected mass is
/// below `tol`.
pub fn poisson_expected_cri(load: f64, params: SplitParams, tol: f64) -> Result<f64, AnalyticsError> {
    mixture(&mut CriTable::new(params), load, tol)
}

/// `λΔ / E[L(λΔ)]`: the arrival rate at which the mean CRI length for
/// `load = λΔ` equals the window `Δ`.
pub fn windowed_stable_rate(load: f64, params: SplitParams) -> Result<f64, AnalyticsError> {
    rate_with(&mut CriTable::new(params), load)
}

fn rate_with(table: &mut CriTable, load: f64) -> Result<f64, AnalyticsError> {
    if load.is_nan() || load <= 0.0 {
        return Err(AnalyticsError::InvalidLoad(load));
    }
    Ok(load / mixture(table, load, DEFAULT_POISSON_TOL)?)
}

/// Windowed stable rate over a grid of loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowScan {
    /// `(load, rate)` for every grid point, in grid order.
    pub points: Vec<(f64, f64)>,
    pub best_load: f64,
    pub best_rate: f64,
}

pub fn scan_windowed_mst(grid: &[f64], params: SplitParams) -> Result<WindowScan, AnalyticsError> {
    if grid.is_empty() {
        return Err(AnalyticsError::EmptyGrid);
    }
    let mut table = CriTable::new(params);
    let mut points = Vec::with_capacity(grid.len());
    for &load in grid {
        points.push((load, rate_with(&mut table, load)?));
    }
    let &(best_load, best_rate) = points
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid is non-empty");
    Ok(WindowScan {
        points,
        best_load,
        best_rate,
    })
}
