//! Long-run slotted simulation with Poisson arrivals.
//!
//! CRIs run back to back on a single channel. Under gated access every
//! packet that arrived while a CRI was running joins the next one. Under
//! windowed access time is cut into windows of `delta` slots and the
//! packets of each window form one CRI, served in window order.

mod arrivals;
mod metrics;
mod sim;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crp::{CriError, ProtocolKind};

pub use arrivals::{Arrival, ArrivalStream};
pub use metrics::{
    collision_degree_distribution, collisions_per_cri_cdf, delay_stats, feedback_cost, feedback_value_histogram,
    mean_packets_in_system, throughput_estimate, CollisionCdf, DelayStats, FeedbackCost,
};
pub use sim::{run_replications, simulate, BACKLOG_SAMPLE_PERIOD, SATURATION_SLOPE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation parameter `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error(transparent)]
    Cri(#[from] CriError),
    #[error("no decoded packets to take statistics over")]
    Empty,
    #[error("{0} sends no skip count in its feedback")]
    NoSkipFeedback(ProtocolKind),
}

/// When fresh arrivals may join a CRI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AccessPolicy {
    Gated,
    Windowed { delta: f64 },
}

impl AccessPolicy {
    pub fn validate(&self) -> Result<(), SimError> {
        match *self {
            AccessPolicy::Gated => Ok(()),
            AccessPolicy::Windowed { delta } if delta.is_finite() && delta > 0.0 => Ok(()),
            AccessPolicy::Windowed { delta } => Err(SimError::InvalidConfig {
                field: "delta",
                reason: format!("window length must be positive, got {delta}"),
            }),
        }
    }
}

/// Everything that determines a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub protocol: ProtocolKind,
    pub policy: AccessPolicy,
    /// Mean arrivals per slot.
    pub lambda: f64,
    /// Slots to simulate.
    pub budget: u64,
    pub seed: u64,
    /// Probability of joining the left group on a split.
    pub p: f64,
}

impl SimConfig {
    pub fn gated(protocol: ProtocolKind, lambda: f64, budget: u64, seed: u64) -> Self {
        SimConfig {
            protocol,
            policy: AccessPolicy::Gated,
            lambda,
            budget,
            seed,
            p: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(SimError::InvalidConfig {
                field: "lambda",
                reason: format!("arrival rate must be finite and non-negative, got {}", self.lambda),
            });
        }
        if self.budget == 0 {
            return Err(SimError::InvalidConfig {
                field: "budget",
                reason: "at least one slot is required".into(),
            });
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(SimError::InvalidConfig {
                field: "p",
                reason: format!("splitting probability must lie in (0, 1), got {}", self.p),
            });
        }
        self.policy.validate()
    }
}

/// Channel use by slot type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotCounts {
    pub idle: u64,
    pub success: u64,
    pub collision: u64,
    /// Windowed access only: slots with no CRI because the next window had
    /// not closed yet.
    pub unscheduled: u64,
}

/// Per-CRI series, one entry per CRI that finished within the budget.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CriSeries {
    pub packets: Vec<u32>,
    pub lengths: Vec<u32>,
    pub collisions: Vec<u32>,
    pub memory_highwater: Vec<u32>,
}

impl CriSeries {
    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }
}

/// Aggregates of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: SimConfig,
    pub slots_simulated: u64,
    /// Packets that arrived before the end of the last simulated slot.
    pub arrivals: u64,
    pub packets_decoded: u64,
    /// Arrived but not decoded when the budget ran out.
    pub terminal_backlog: u64,
    pub throughput: f64,
    pub slot_counts: SlotCounts,
    /// Decode slot minus arrival slot, as counts per delay value.
    pub delay_hist: BTreeMap<u64, u64>,
    pub collision_degree_hist: BTreeMap<u64, u64>,
    /// Skip counts on success slots (SIC protocols only).
    pub feedback_k_hist: BTreeMap<u32, u64>,
    /// Slots whose feedback carried a non-null signal.
    pub z_broadcast_slots: u64,
    pub cris: CriSeries,
    /// `(slot, backlog)` at the start of every sampled slot.
    pub backlog_samples: Vec<(u64, u64)>,
    /// Least-squares backlog growth per slot over the second half of the run.
    pub backlog_slope: f64,
    /// Backlog kept growing: the arrival rate is above what the protocol
    /// sustains.
    pub saturated: bool,
}

impl MetricsReport {
    pub fn delay_samples(&self) -> u64 {
        self.delay_hist.values().sum()
    }

    pub fn mean_delay(&self) -> Option<f64> {
        let n = self.delay_samples();
        (n > 0).then(|| self.delay_hist.iter().map(|(&d, &c)| d as f64 * c as f64).sum::<f64>() / n as f64)
    }

    pub fn collision_slots(&self) -> u64 {
        self.slot_counts.collision
    }
}
