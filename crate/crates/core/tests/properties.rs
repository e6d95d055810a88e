use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use minidpsnn::exchange::{
    broker_route, flat_inter_node_streams, AxonalSpike, ExchangeMode, NodeMap, RankTraffic,
    SendMode,
};
use minidpsnn::harness::{run_simulation, RunConfig};
use minidpsnn::instrumentation::{phase_report, PhaseTimers};
use minidpsnn::model::{build_routing_tables, build_topology, partition_columns, GridConfig};

fn grid(gx: u32, gy: u32, npc: u32, seed: u64) -> GridConfig {
    GridConfig {
        grid_x: gx,
        grid_y: gy,
        neurons_per_column: npc,
        out_degree_exc: npc / 2,
        out_degree_inh: npc / 4,
        seed,
        ..GridConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn connectivity_rules_hold(gx in 1u32..5, gy in 1u32..5, npc in 20u32..80, seed in any::<u64>()) {
        let g = grid(gx, gy, npc, seed);
        let t = build_topology(&g).unwrap();
        let n_exc = (g.excitatory_fraction * f64::from(npc)).round() as u32;
        let intra = (g.intra_fraction * f64::from(g.out_degree_exc)).round() as usize;
        let single_column = gx * gy == 1;
        for src in 0..t.total_neurons() {
            let syn: Vec<_> = t.synapses_of(src).collect();
            prop_assert!(syn.iter().all(|s| u32::from(s.delay) >= g.delay_min && u32::from(s.delay) <= g.delay_max));
            let local = syn.iter().filter(|s| s.target / npc == src / npc).count();
            if src % npc < n_exc {
                prop_assert_eq!(syn.len(), g.out_degree_exc as usize);
                if !single_column {
                    prop_assert_eq!(local, intra);
                }
            } else {
                prop_assert_eq!(syn.len(), g.out_degree_inh as usize);
                prop_assert!(syn.iter().all(|s| s.target / npc == src / npc && s.target % npc < n_exc));
            }
        }
    }

    #[test]
    fn routing_matches_brute_force(gx in 1u32..4, gy in 1u32..4, npc in 10u32..40, ranks in 1u32..20, seed in any::<u64>()) {
        let t = build_topology(&grid(gx, gy, npc, seed)).unwrap();
        let p = partition_columns(&t.layout, ranks).unwrap();
        let routes = build_routing_tables(&t, &p).unwrap();
        let owner = |n: u32| (0..ranks).find(|&r| p.range(r).contains(&n)).unwrap();
        let mut want: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for src in 0..t.total_neurons() {
            for s in t.synapses_of(src) {
                let (a, b) = (owner(src), owner(s.target));
                if a != b {
                    want.entry(a).or_default().insert(b);
                }
            }
        }
        for r in 0..ranks {
            let got: BTreeSet<u32> = routes.destinations(r).iter().copied().collect();
            prop_assert_eq!(got, want.remove(&r).unwrap_or_default());
        }
    }

    #[test]
    fn broker_delivers_what_flat_delivers(
        n_ranks in 2u32..10,
        per_node in 1u32..5,
        pairs in prop::collection::vec((0u32..10, 0u32..10, prop::collection::vec(0u32..50, 0..6)), 0..30),
    ) {
        let nodes = NodeMap::uniform(n_ranks, per_node).unwrap();
        let mut traffic = RankTraffic::new();
        for (s, d, ids) in pairs {
            let (s, d) = (s % n_ranks, d % n_ranks);
            // A source neuron belongs to exactly one rank.
            let spikes: BTreeSet<_> = ids.into_iter().map(|i| AxonalSpike::new(i * n_ranks + s, 3)).collect();
            traffic.entry((s, d)).or_default().extend(spikes);
        }
        for v in traffic.values_mut() {
            v.sort();
            v.dedup();
        }
        let route = broker_route(&nodes, &traffic).unwrap();
        let mut want: BTreeMap<u32, BTreeSet<AxonalSpike>> = BTreeMap::new();
        for (&(s, d), v) in &traffic {
            if s != d && !v.is_empty() {
                want.entry(d).or_default().extend(v.iter().copied());
            }
        }
        let got: BTreeMap<u32, BTreeSet<AxonalSpike>> =
            route.delivered().into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect();
        prop_assert_eq!(got, want);
        let n = nodes.n_nodes() as usize;
        prop_assert!(route.inter_node_streams() <= n * (n - 1));
        prop_assert!(route.inter_node_streams() <= flat_inter_node_streams(&nodes, &traffic));
    }

    #[test]
    fn phase_fractions_sum_to_one(
        parts in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0, 0.0f64..5.0, 0.0f64..5.0, 0.0f64..1.0, 1u64..100), 1..8),
    ) {
        let timers: Vec<PhaseTimers> = parts
            .iter()
            .map(|&(c, m, comm, s, extra, steps)| PhaseTimers {
                computation: c,
                memory_management: m,
                communication: comm,
                synchronization: s,
                total: c + m + comm + s + extra + 1e-3,
                steps,
            })
            .collect();
        let b = phase_report(&timers).unwrap();
        for f in b.per_rank.iter().chain(std::iter::once(&b.pooled)) {
            prop_assert!((f.sum() - 1.0).abs() < 1e-9);
            prop_assert!(f.residual >= 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn raster_independent_of_ranks_and_mode(
        ranks in 2u32..14,
        per_node in 1u32..5,
        broker in any::<bool>(),
        p2p in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let mut c = RunConfig {
            grid: grid(3, 2, 60, 0),
            sim_seconds: 0.2,
            seed,
            ..RunConfig::default()
        };
        c.stimulus.weight = 0.7;
        let one = run_simulation(&c).unwrap();
        let many = run_simulation(&RunConfig {
            n_ranks: ranks,
            ranks_per_node: per_node,
            exchange: if broker { ExchangeMode::Broker } else { ExchangeMode::Flat },
            send: if p2p { SendMode::PointToPoint } else { SendMode::Collective },
            ..c
        })
        .unwrap();
        prop_assert!(one.spike_count > 0);
        prop_assert_eq!(one.raster_hash, many.raster_hash);
        prop_assert_eq!(one.synaptic_events, many.synaptic_events);
    }
}
