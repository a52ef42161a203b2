//! Expected CRI length and throughput of ATIC.
//!
//! `L_n` is the expected number of slots needed to resolve `n` initially
//! colliding packets. Two evaluators are provided: the conditioning
//! recursion in [`CriTable`] (all terms positive, the canonical one) and the
//! alternating binomial sum in [`expected_cri_closed`], which loses digits
//! quickly and reports [`AnalyticsError::PrecisionLoss`] when it does.

mod closed;
mod recursion;
mod windowed;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use closed::{expected_cri_closed, expected_cri_closed_with_bound, CLOSED_FORM_TOLERANCE};
pub use recursion::{conditional_throughput, expected_cri_recursive, CriTable};
pub use windowed::{poisson_expected_cri, scan_windowed_mst, windowed_stable_rate, WindowScan, DEFAULT_POISSON_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("splitting probability {0} is outside (0, 1)")]
    InvalidProbability(f64),
    #[error("closed form at n={n} has error bound {bound:.3e}, above {limit:.0e}; use the recursion")]
    PrecisionLoss { n: u64, bound: f64, limit: f64 },
    #[error("load {0} must be finite and non-negative")]
    InvalidLoad(f64),
    #[error("tolerance {0} must be positive")]
    InvalidTolerance(f64),
    #[error("scan grid is empty")]
    EmptyGrid,
}

/// Splitting probability `p` with its derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    pub p: f64,
    pub q: f64,
    /// `2 − 4pq − 3(p² + q²)`; equals `−1/2` at `p = 1/2`.
    pub r: f64,
}

impl SplitParams {
    pub fn new(p: f64) -> Result<Self, AnalyticsError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(AnalyticsError::InvalidProbability(p));
        }
        let q = 1.0 - p;
        let r = 2.0 - 4.0 * p * q - 3.0 * (p * p + q * q);
        Ok(SplitParams { p, q, r })
    }

    pub fn fair() -> Self {
        SplitParams::new(0.5).expect("0.5 is a valid probability")
    }
}

/// Expected length and conditional throughput for one `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriStats {
    pub n: u64,
    pub expected_length: f64,
    pub throughput: f64,
}

/// Limit of `n / L_n` as `n` grows, ignoring the small oscillating term:
/// the binary entropy in nats over `1 + r/2`.
pub fn asymptotic_throughput(params: SplitParams) -> f64 {
    let SplitParams { p, q, r } = params;
    (-p * p.ln() - q * q.ln()) / (1.0 + r / 2.0)
}
