//! Statistics derived from a [`MetricsReport`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MetricsReport, SimError};
use crate::crp::ProtocolKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub count: u64,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    pub p50: u64,
    pub p95: u64,
    pub p99: u64,
    pub max: u64,
}

/// Smallest delay whose cumulative share reaches `q` (nearest rank).
fn percentile(hist: &BTreeMap<u64, u64>, count: u64, q: f64) -> u64 {
    let rank = ((q * count as f64).ceil() as u64).max(1);
    let mut seen = 0;
    for (&d, &c) in hist {
        seen += c;
        if seen >= rank {
            return d;
        }
    }
    *hist.keys().next_back().expect("non-empty histogram")
}

pub fn delay_stats(report: &MetricsReport) -> Result<DelayStats, SimError> {
    let hist = &report.delay_hist;
    let count: u64 = hist.values().sum();
    if count == 0 {
        return Err(SimError::Empty);
    }
    let n = count as f64;
    let mean = hist.iter().map(|(&d, &c)| d as f64 * c as f64).sum::<f64>() / n;
    let variance = hist
        .iter()
        .map(|(&d, &c)| c as f64 * (d as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    Ok(DelayStats {
        count,
        mean,
        variance,
        p50: percentile(hist, count, 0.50),
        p95: percentile(hist, count, 0.95),
        p99: percentile(hist, count, 0.99),
        max: *hist.keys().next_back().expect("non-empty histogram"),
    })
}

/// Mean number of packets in the system, `lambda` times the mean delay
/// (Little's law).
pub fn mean_packets_in_system(report: &MetricsReport) -> Result<f64, SimError> {
    Ok(report.config.lambda * delay_stats(report)?.mean)
}

/// Share of collision slots by collision degree. With `max_degree` set,
/// degrees above it are left out and the shares sum to one over
/// `2..=max_degree`.
pub fn collision_degree_distribution(
    report: &MetricsReport,
    max_degree: Option<u64>,
) -> Result<BTreeMap<u64, f64>, SimError> {
    let limit = max_degree.unwrap_or(u64::MAX);
    let counted: Vec<(u64, u64)> = report
        .collision_degree_hist
        .iter()
        .filter(|&(&d, _)| d <= limit)
        .map(|(&d, &c)| (d, c))
        .collect();
    let total: u64 = counted.iter().map(|&(_, c)| c).sum();
    if total == 0 {
        return Err(SimError::Empty);
    }
    Ok(counted.into_iter().map(|(d, c)| (d, c as f64 / total as f64)).collect())
}

/// Empirical mass function of the skip count on success slots.
pub fn feedback_value_histogram(report: &MetricsReport) -> Result<BTreeMap<u32, f64>, SimError> {
    let protocol = report.config.protocol;
    if !protocol.uses_sic() {
        return Err(SimError::NoSkipFeedback(protocol));
    }
    let total: u64 = report.feedback_k_hist.values().sum();
    if total == 0 {
        return Ok(BTreeMap::new());
    }
    Ok(report
        .feedback_k_hist
        .iter()
        .map(|(&k, &c)| (k, c as f64 / total as f64))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionCdf {
    /// `(c, P(collisions ≤ c))` for `c = 0..=max`.
    pub cdf: Vec<(u32, f64)>,
    /// Total collisions over total packets of the completed CRIs.
    pub collisions_per_packet: f64,
    pub cris: usize,
}

impl CollisionCdf {
    pub fn at(&self, c: u32) -> f64 {
        match self.cdf.iter().find(|&&(x, _)| x == c) {
            Some(&(_, v)) => v,
            None if self.cdf.last().is_some_and(|&(x, _)| c > x) => 1.0,
            None => 0.0,
        }
    }
}

pub fn collisions_per_cri_cdf(report: &MetricsReport) -> Result<CollisionCdf, SimError> {
    let series = &report.cris;
    if series.is_empty() {
        return Err(SimError::Empty);
    }
    let max = *series.collisions.iter().max().expect("non-empty");
    let mut counts = vec![0u64; max as usize + 1];
    for &c in &series.collisions {
        counts[c as usize] += 1;
    }
    let total = series.len() as f64;
    let mut acc = 0u64;
    let cdf = counts
        .iter()
        .enumerate()
        .map(|(c, &k)| {
            acc += k;
            (c as u32, acc as f64 / total)
        })
        .collect();
    let collisions: u64 = series.collisions.iter().map(|&c| u64::from(c)).sum();
    let packets: u64 = series.packets.iter().map(|&c| u64::from(c)).sum();
    Ok(CollisionCdf {
        cdf,
        collisions_per_packet: if packets == 0 {
            0.0
        } else {
            collisions as f64 / packets as f64
        },
        cris: series.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackCost {
    /// Bits of the outcome flag on every slot.
    pub flag_bits: u32,
    /// Largest skip count seen (0 for protocols without skips).
    pub k_max: u32,
    /// Share of channel slots whose feedback carried a signal.
    pub signal_slot_fraction: f64,
    pub mean_bits_per_slot: f64,
    pub max_bits_per_slot: u64,
}

/// Feedback bits per channel slot. The flag takes 2 bits for ternary
/// feedback and `ceil(log2(k_max + 3))` bits when it also carries skip
/// counts up to `k_max`; a broadcast signal costs about one packet,
/// `packet_bits`.
pub fn feedback_cost(report: &MetricsReport, packet_bits: u32) -> Result<FeedbackCost, SimError> {
    let protocol = report.config.protocol;
    if protocol.broadcasts_collisions() && packet_bits == 0 {
        return Err(SimError::InvalidConfig {
            field: "packet_bits",
            reason: "signal broadcasts need a positive packet size".into(),
        });
    }
    let c = report.slot_counts;
    let channel_slots = c.idle + c.success + c.collision;
    let k_max = report.feedback_k_hist.keys().next_back().copied().unwrap_or(0);
    let flag_bits = match protocol {
        ProtocolKind::Bta | ProtocolKind::Mta => 2,
        _ => (f64::from(k_max) + 3.0).log2().ceil() as u32,
    };
    let signal_slot_fraction = if channel_slots == 0 {
        0.0
    } else {
        report.z_broadcast_slots as f64 / channel_slots as f64
    };
    let signal_bits = if protocol.broadcasts_collisions() {
        packet_bits
    } else {
        0
    };
    Ok(FeedbackCost {
        flag_bits,
        k_max,
        signal_slot_fraction,
        mean_bits_per_slot: f64::from(flag_bits) + signal_slot_fraction * f64::from(signal_bits),
        max_bits_per_slot: u64::from(flag_bits)
            + if report.z_broadcast_slots > 0 {
                u64::from(signal_bits)
            } else {
                0
            },
    })
}

/// Decoded packets per simulated slot.
pub fn throughput_estimate(report: &MetricsReport) -> f64 {
    if report.slots_simulated == 0 {
        return 0.0;
    }
    report.packets_decoded as f64 / report.slots_simulated as f64
}
