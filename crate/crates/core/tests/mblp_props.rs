//! Branch and bound against exhaustive enumeration, plus model-level
//! properties on solved instances.

use nfvslice::formulation::{build, build_variant, BuildOptions, ModelIR, VarKey, Variant};
use nfvslice::instancegen::{fig1_instance, fig1_rate4_instance, generate, generate_micro, GenConfig};
use nfvslice::mblp::{brute_force_mblp, solve_mblp, Budget, MblpSolution, MblpStatus};
use nfvslice::net_model::Instance;
use nfvslice::solution::{decode, validate};

const MICRO_CAP: usize = 22;

fn solve(model: &ModelIR) -> MblpSolution {
    solve_mblp(model, Budget::nodes(2_000)).unwrap()
}

fn corpus() -> Vec<Instance> {
    let mut out = vec![fig1_instance(), fig1_rate4_instance()];
    for seed in 0..12 {
        for sc in 1..=2 {
            out.push(
                generate(&GenConfig {
                    seed,
                    service_count: sc,
                    ..GenConfig::default()
                })
                .unwrap(),
            );
        }
    }
    out
}

#[test]
fn micro_instances_match_enumeration() {
    for seed in 1000..1020 {
        let inst = generate_micro(seed, MICRO_CAP);
        let model = build_variant(&inst, Variant::Full).unwrap();
        let bb = solve(&model);
        let bf = brute_force_mblp(&model, MICRO_CAP).unwrap();
        assert_eq!(bb.status, bf.status, "seed {seed}");
        if bb.status == MblpStatus::Optimal {
            assert_eq!(bb.objective, bf.objective, "seed {seed}");
        }
    }
}

#[test]
fn root_bound_and_incumbents_are_monotone() {
    for inst in corpus() {
        let model = build_variant(&inst, Variant::Full).unwrap();
        let sol = solve(&model);
        if sol.status != MblpStatus::Optimal {
            continue;
        }
        let root = sol.stats.root_bound.unwrap();
        assert!(root <= sol.objective + 1e-6);
        assert!(sol.stats.incumbents.windows(2).all(|w| w[1].1 <= w[0].1));
        assert_eq!(sol.stats.bound_regressions, 0);
    }
}

#[test]
fn solving_is_deterministic() {
    for inst in corpus().into_iter().take(8) {
        let model = build_variant(&inst, Variant::Full).unwrap();
        let a = solve(&model);
        let b = solve(&model);
        assert_eq!(a.status, b.status);
        assert_eq!(a.values, b.values);
        assert_eq!(a.stats.nodes, b.stats.nodes);
    }
}

#[test]
fn relaxations_and_path_budgets_are_ordered() {
    for inst in corpus() {
        let full = solve(&build_variant(&inst, Variant::Full).unwrap());
        if full.status == MblpStatus::Optimal {
            let relaxed = solve(&build_variant(&inst, Variant::NoLatency).unwrap());
            assert_eq!(relaxed.status, MblpStatus::Optimal);
            assert!(relaxed.objective <= full.objective);
        }
        let one = solve(
            &build(
                &inst,
                &BuildOptions {
                    path_budget: Some(1),
                    ..BuildOptions::new(Variant::Full)
                },
            )
            .unwrap(),
        );
        if one.status == MblpStatus::Optimal {
            assert_eq!(full.status, MblpStatus::Optimal);
            assert!(full.objective <= one.objective);
        }
    }
}

#[test]
fn products_equal_their_factors_and_theta_bounds_delay() {
    for inst in corpus() {
        let model = build_variant(&inst, Variant::Full).unwrap();
        let sol = solve(&model);
        if !sol.has_solution() {
            continue;
        }
        for (j, col) in model.columns.iter().enumerate() {
            if let VarKey::Omega { k, s, vs, vt } = col.key {
                let a = sol.value(&model, &VarKey::X { k, s, v: vs }).unwrap();
                let b = sol.value(&model, &VarKey::X { k, s: s + 1, v: vt }).unwrap();
                assert!((sol.values[j] - a * b).abs() <= 1e-6);
            }
        }
        let plan = decode(&model, &sol, &inst).unwrap();
        assert!(validate(&plan, &inst).passed());
        for (k, svc) in plan.services.iter().enumerate() {
            for seg in &svc.segments {
                let theta = sol.value(&model, &VarKey::Theta { k, s: seg.index }).unwrap();
                assert!(
                    seg.delay <= theta + 1e-6,
                    "{} s={}: {} > {}",
                    svc.id,
                    seg.index,
                    seg.delay,
                    theta
                );
                let total: f64 = seg.paths.iter().map(|p| p.rate).sum();
                assert!((total - seg.rate).abs() <= 1e-6);
            }
        }
        let p = &plan.power;
        let rates: f64 = inst.services.iter().map(|s| s.rates[1..].iter().sum::<f64>()).sum();
        let expected = p.params.beta1 * plan.activated.len() as f64
            + p.params.beta2 * (inst.cloud_nodes.len() - plan.activated.len()) as f64
            + p.params.delta * rates;
        assert!((p.total - expected).abs() <= 1e-9);
    }
}
