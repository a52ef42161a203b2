//! The simulation loop.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;

use super::arrivals::{Arrival, ArrivalStream};
use super::{AccessPolicy, CriSeries, MetricsReport, SimConfig, SimError, SlotCounts};
use crate::crp::{CriSession, SeededCoins};
use crate::signal::{PacketId, SlotOutcome};

/// Backlog is sampled every this many slots.
pub const BACKLOG_SAMPLE_PERIOD: u64 = 256;

/// Backlog growth (packets per slot) above which a run is flagged as
/// saturated. Overloads a few percent above the stable rate add about
/// 0.02 to 0.03 packets per slot; stable runs stay within about 1e-4.
pub const SATURATION_SLOPE: f64 = 0.005;

struct RunningCri {
    session: CriSession,
    arrival_slot: HashMap<PacketId, u64>,
    collisions: u32,
}

/// Least-squares slope of `y` on `x`.
fn slope(points: &[(u64, u64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return 0.0;
    }
    let mx = points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in points {
        let dx = x as f64 - mx;
        sxy += dx * (y as f64 - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Runs one simulation. Deterministic in `cfg`.
pub fn simulate(cfg: &SimConfig) -> Result<MetricsReport, SimError> {
    cfg.validate()?;
    let protocol = cfg.protocol;
    let mut stream = ArrivalStream::new(cfg.lambda, cfg.seed);
    let mut coins = SeededCoins::new(cfg.seed);
    let mut waiting: VecDeque<Arrival> = VecDeque::new();
    let mut arrived = 0u64;
    let mut decoded = 0u64;
    let mut window = 0u64;
    let mut running: Option<RunningCri> = None;

    let mut counts = SlotCounts::default();
    let mut delay_hist = std::collections::BTreeMap::new();
    let mut degree_hist = std::collections::BTreeMap::new();
    let mut k_hist = std::collections::BTreeMap::new();
    let mut z_slots = 0u64;
    let mut cris = CriSeries::default();
    let mut backlog = Vec::new();

    for t in 0..cfg.budget {
        while let Some(a) = stream.pop_before(t as f64) {
            waiting.push_back(a);
            arrived += 1;
        }
        if t % BACKLOG_SAMPLE_PERIOD == 0 {
            backlog.push((t, arrived - decoded));
        }

        if running.is_none() {
            let members: Vec<Arrival> = match cfg.policy {
                AccessPolicy::Gated => waiting.drain(..).collect(),
                AccessPolicy::Windowed { delta } => {
                    let end = (window + 1) as f64 * delta;
                    if (t as f64) < end.ceil() {
                        counts.unscheduled += 1;
                        continue;
                    }
                    window += 1;
                    let take = waiting.iter().take_while(|a| a.time < end).count();
                    waiting.drain(..take).collect()
                }
            };
            let ids: Vec<PacketId> = members.iter().map(|a| a.id).collect();
            running = Some(RunningCri {
                session: CriSession::new(protocol, &ids, cfg.p)?,
                arrival_slot: members.iter().map(|a| (a.id, a.slot)).collect(),
                collisions: 0,
            });
        }

        let cri = running.as_mut().expect("a CRI is running");
        let slot = cri.session.step(&mut coins)?;
        match slot.outcome {
            SlotOutcome::Idle => counts.idle += 1,
            SlotOutcome::Singleton { .. } => {
                counts.success += 1;
                if protocol.uses_sic() {
                    *k_hist.entry(slot.feedback.skip_k().unwrap_or(0)).or_insert(0u64) += 1;
                }
            }
            SlotOutcome::Collision { degree } => {
                counts.collision += 1;
                cri.collisions += 1;
                *degree_hist.entry(degree as u64).or_insert(0u64) += 1;
            }
        }
        if !slot.feedback.broadcast_z.is_empty() {
            z_slots += 1;
        }
        for id in &slot.newly_resolved {
            let a = cri.arrival_slot[id];
            *delay_hist.entry(t - a).or_insert(0u64) += 1;
            decoded += 1;
        }
        if slot.finished {
            let cri = running.take().expect("a CRI is running");
            cris.packets.push(cri.session.total_packets() as u32);
            cris.lengths.push(cri.session.slots_used() as u32);
            cris.collisions.push(cri.collisions);
            cris.memory_highwater.push(cri.session.memory_highwater() as u32);
        }
    }
    while stream.pop_before(cfg.budget as f64).is_some() {
        arrived += 1;
    }

    let half = cfg.budget / 2;
    let trailing: Vec<(u64, u64)> = backlog.iter().copied().filter(|&(t, _)| t >= half).collect();
    let backlog_slope = slope(&trailing);
    Ok(MetricsReport {
        config: *cfg,
        slots_simulated: cfg.budget,
        arrivals: arrived,
        packets_decoded: decoded,
        terminal_backlog: arrived - decoded,
        throughput: decoded as f64 / cfg.budget as f64,
        slot_counts: counts,
        delay_hist,
        collision_degree_hist: degree_hist,
        feedback_k_hist: k_hist,
        z_broadcast_slots: z_slots,
        cris,
        backlog_samples: backlog,
        backlog_slope,
        saturated: backlog_slope > SATURATION_SLOPE,
    })
}

/// Runs `base` once per seed, in parallel. Results are in `seeds` order.
pub fn run_replications(base: &SimConfig, seeds: &[u64]) -> Result<Vec<MetricsReport>, SimError> {
    seeds
        .par_iter()
        .map(|&seed| simulate(&SimConfig { seed, ..*base }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crp::ProtocolKind;

    #[test]
    fn slope_of_a_line() {
        let pts: Vec<(u64, u64)> = (0..10).map(|i| (i * 10, 3 + i * 5)).collect();
        assert!((slope(&pts) - 0.5).abs() < 1e-12);
        assert_eq!(slope(&pts[..1]), 0.0);
    }

    #[test]
    fn idle_channel_runs_empty_cris() {
        let r = simulate(&SimConfig::gated(ProtocolKind::Atic, 0.0, 50, 1)).unwrap();
        assert_eq!(r.slot_counts.idle, 50);
        assert_eq!(r.cris.len(), 50);
        assert_eq!(r.throughput, 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut c = SimConfig::gated(ProtocolKind::Bta, 0.3, 10, 0);
        c.budget = 0;
        assert!(simulate(&c).is_err());
        c.budget = 10;
        c.lambda = -1.0;
        assert!(simulate(&c).is_err());
        c.lambda = 0.3;
        c.policy = AccessPolicy::Windowed { delta: 0.0 };
        assert!(simulate(&c).is_err());
    }

    #[test]
    fn windowed_waits_for_the_window_to_close() {
        let mut c = SimConfig::gated(ProtocolKind::Sicta, 0.0, 20, 3);
        c.policy = AccessPolicy::Windowed { delta: 4.0 };
        let r = simulate(&c).unwrap();
        // windows close at 4, 8, 12, 16: an idle CRI each, the rest unused
        assert_eq!(r.slot_counts.idle, 4);
        assert_eq!(r.slot_counts.unscheduled, 16);
    }
}
