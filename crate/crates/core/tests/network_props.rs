//! Shortest-path statistics against exhaustive enumeration, and instance
//! JSON round trips.

use nfvslice::instancegen::{generate, GenConfig};
use nfvslice::net_model::{shortest_path_stats, Instance, Link, Network};
use proptest::prelude::*;

/// Minimum delay over every simple path, by depth-first enumeration.
fn enumerate(n: usize, arcs: &[(usize, usize, f64)], from: usize, to: usize) -> f64 {
    fn dfs(at: usize, to: usize, acc: f64, seen: &mut Vec<bool>, arcs: &[(usize, usize, f64)], best: &mut f64) {
        if at == to {
            *best = best.min(acc);
            return;
        }
        for &(t, h, d) in arcs {
            if t == at && !seen[h] {
                seen[h] = true;
                dfs(h, to, acc + d, seen, arcs, best);
                seen[h] = false;
            }
        }
    }
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut best = f64::INFINITY;
    dfs(from, to, 0.0, &mut seen, arcs, &mut best);
    best
}

fn network(n: usize, arcs: &[(usize, usize, f64)]) -> Network {
    Network {
        nodes: (0..n).map(|i| format!("v{i}")).collect(),
        links: arcs
            .iter()
            .map(|&(t, h, d)| Link {
                tail: format!("v{t}"),
                head: format!("v{h}"),
                capacity: 1.0,
                delay: d,
            })
            .collect(),
        cloud_nodes: vec![],
    }
}

fn digraph() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (2usize..=7).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        let m = pairs.len();
        (
            Just(n),
            prop::collection::vec((any::<bool>(), 0u32..50), m).prop_map(move |picks| {
                pairs
                    .iter()
                    .zip(picks)
                    .filter(|(_, (keep, _))| *keep)
                    .map(|(&(i, j), (_, d))| (i, j, d as f64 / 4.0))
                    .collect::<Vec<_>>()
            }),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn distances_match_enumeration((n, arcs) in digraph()) {
        prop_assume!(!arcs.is_empty());
        let stats = shortest_path_stats(&network(n, &arcs)).unwrap();
        let mut finite = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let want = enumerate(n, &arcs, i, j);
                let got = stats.dist[&(format!("v{i}"), format!("v{j}"))];
                if want.is_infinite() {
                    prop_assert!(got.is_infinite());
                } else {
                    prop_assert!((got - want).abs() < 1e-9, "{i}->{j}: {got} vs {want}");
                    finite.push(want);
                }
            }
        }
        let mean = if finite.is_empty() { 0.0 } else { finite.iter().sum::<f64>() / finite.len() as f64 };
        prop_assert!((stats.mean - mean).abs() < 1e-9);
    }

    #[test]
    fn generated_instances_round_trip(seed in any::<u64>(), services in 0usize..4) {
        let cfg = GenConfig { seed, service_count: services, ..GenConfig::default() };
        let inst = generate(&cfg).unwrap();
        let back = Instance::from_json(&inst.to_json()).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(back.to_json(), inst.to_json());
    }
}
