//! Slotted simulation: conservation, reproducibility and access policies.

use proptest::prelude::*;
use treesplit::crp::ProtocolKind;
use treesplit::traffic::{
    collisions_per_cri_cdf, delay_stats, feedback_value_histogram, run_replications, simulate, AccessPolicy, SimConfig,
};

fn protocol() -> impl Strategy<Value = ProtocolKind> {
    prop::sample::select(ProtocolKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn packets_are_conserved(
        protocol in protocol(),
        lambda in 0.0f64..1.2,
        budget in 1u64..4000,
        seed in any::<u64>(),
        windowed in any::<bool>(),
        delta in 0.5f64..30.0,
    ) {
        let mut cfg = SimConfig::gated(protocol, lambda, budget, seed);
        if windowed {
            cfg.policy = AccessPolicy::Windowed { delta };
        }
        let r = simulate(&cfg).unwrap();
        prop_assert_eq!(r.arrivals, r.packets_decoded + r.terminal_backlog);
        prop_assert_eq!(r.delay_samples(), r.packets_decoded);
        prop_assert!(r.throughput <= 1.0);
        let c = r.slot_counts;
        prop_assert_eq!(c.idle + c.success + c.collision + c.unscheduled, budget);
        prop_assert_eq!(r.collision_degree_hist.values().sum::<u64>(), c.collision);
        if protocol.uses_sic() {
            prop_assert_eq!(r.feedback_k_hist.values().sum::<u64>(), c.success);
        } else {
            prop_assert!(r.feedback_k_hist.is_empty());
        }
        prop_assert!(r.delay_hist.keys().all(|&d| d >= 1));
        let finished: u64 = r.cris.packets.iter().map(|&n| u64::from(n)).sum();
        prop_assert!(finished <= r.packets_decoded);
    }
}

#[test]
fn reruns_are_identical() {
    for protocol in ProtocolKind::ALL {
        let cfg = SimConfig::gated(protocol, 0.6, 20_000, 31);
        let a = serde_json::to_string(&simulate(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&simulate(&cfg).unwrap()).unwrap();
        assert_eq!(a, b, "{protocol}");
    }
}

#[test]
fn replications_are_independent_of_scheduling() {
    let base = SimConfig::gated(ProtocolKind::Atic, 0.7, 5000, 0);
    let seeds = [9, 3, 12, 3];
    let par = run_replications(&base, &seeds).unwrap();
    for (seed, r) in seeds.iter().zip(&par) {
        assert_eq!(r, &simulate(&SimConfig { seed: *seed, ..base }).unwrap());
    }
    assert_eq!(par[1], par[3]);
    assert_ne!(par[0].arrivals, 0);
}

#[test]
fn zero_rate_is_idle_everywhere() {
    let r = simulate(&SimConfig::gated(ProtocolKind::Sicta, 0.0, 1000, 2)).unwrap();
    assert_eq!(r.throughput, 0.0);
    assert!(delay_stats(&r).is_err());
    assert!(feedback_value_histogram(&r).unwrap().is_empty());
    assert_eq!(collisions_per_cri_cdf(&r).unwrap().at(0), 1.0);
}

#[test]
fn windowed_never_beats_gated_at_saturation() {
    for protocol in [ProtocolKind::Sicta, ProtocolKind::Atic] {
        let gated = simulate(&SimConfig::gated(protocol, 1.2, 200_000, 4)).unwrap();
        for delta in [1.0, 4.0, 16.0, 64.0] {
            let mut cfg = SimConfig::gated(protocol, 1.2, 200_000, 4);
            cfg.policy = AccessPolicy::Windowed { delta };
            let w = simulate(&cfg).unwrap();
            assert!(
                w.throughput <= gated.throughput + 0.01,
                "{protocol} delta {delta}: windowed {} gated {}",
                w.throughput,
                gated.throughput
            );
        }
    }
}

#[test]
fn light_load_delay_is_short() {
    let r = simulate(&SimConfig::gated(ProtocolKind::Atic, 0.05, 100_000, 1)).unwrap();
    let d = delay_stats(&r).unwrap();
    assert!(!r.saturated);
    assert!(d.mean > 1.0 && d.mean < 2.0, "{}", d.mean);
    assert!(d.p50 <= d.p95 && d.p95 <= d.p99 && d.p99 <= d.max);
}
