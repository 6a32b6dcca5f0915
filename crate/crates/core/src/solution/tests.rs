use super::*;
use crate::formulation::build_variant;
use crate::instancegen::{fig1_instance, fig1_rate4_instance};
use crate::mblp::{solve_mblp, Budget, MblpStatus};

fn solved_plan(inst: &Instance, variant: Variant) -> SlicePlan {
    let model = build_variant(inst, variant).unwrap();
    let sol = solve_mblp(&model, Budget::nodes(100_000)).unwrap();
    assert_eq!(sol.status, MblpStatus::Optimal);
    decode(&model, &sol, inst).unwrap()
}

fn names(path: &RoutedPath) -> Vec<&str> {
    path.nodes.iter().map(String::as_str).collect()
}

#[test]
fn fig1_full_plan() {
    let inst = fig1_instance();
    let plan = solved_plan(&inst, Variant::Full);
    assert_eq!(plan.activated, vec!["C", "E"]);

    let one = plan.service("I").unwrap();
    assert_eq!(one.placements[0].node, "E");
    assert_eq!(one.segments[0].paths.len(), 1);
    let p0 = names(&one.segments[0].paths[0]);
    assert!(p0 == ["A", "B", "E"] || p0 == ["A", "C", "E"], "{p0:?}");
    assert_eq!(names(&one.segments[1].paths[0]), ["E", "D"]);
    assert_eq!(e2e_delay(&plan, "I").unwrap(), 4.0);

    let two = plan.service("II").unwrap();
    assert_eq!(two.placements[0].node, "C");
    assert_eq!(names(&two.segments[0].paths[0]), ["A", "C"]);
    assert_eq!(names(&two.segments[1].paths[0]), ["C", "B"]);
    assert_eq!(e2e_delay(&plan, "II").unwrap(), 3.0);

    let report = validate(&plan, &inst);
    assert!(report.passed(), "{report}");
    assert_eq!(report.checks.len(), VALIDATED_FAMILIES.len());
}

#[test]
fn fig1_rate4_splits_over_two_paths() {
    let inst = fig1_rate4_instance();
    let plan = solved_plan(&inst, Variant::Full);
    let svc = &plan.services[0];
    let mut seg0: Vec<(Vec<&str>, f64)> = svc.segments[0].paths.iter().map(|p| (names(p), p.rate)).collect();
    seg0.sort_by(|a, b| a.0.cmp(&b.0));
    assert_eq!(seg0, vec![(vec!["A", "B", "E"], 2.0), (vec!["A", "C", "E"], 2.0)]);
    assert_eq!(svc.segments[1].paths.len(), 1);
    assert_eq!(names(&svc.segments[1].paths[0]), ["E", "D"]);
    assert_eq!(svc.segments[1].paths[0].rate, 4.0);
    assert!(validate(&plan, &inst).passed());
}

#[test]
fn fig1_no_latency_plan_misses_service_two_threshold() {
    let inst = fig1_instance();
    let plan = solved_plan(&inst, Variant::NoLatency);
    assert_eq!(plan.activated, vec!["E"]);
    let report = validate(&plan, &inst);
    let e2e = report.check("e2e_latency").unwrap();
    assert!(!e2e.passed);
    assert_eq!(e2e.offending, vec!["II"]);
    assert_eq!(e2e_delay(&plan, "II").unwrap(), 5.0);
    assert_eq!(report.failures(), 1, "{report}");
}

#[test]
fn empty_service_set_gives_empty_plan() {
    let mut inst = fig1_instance();
    inst.services.clear();
    let plan = solved_plan(&inst, Variant::Full);
    assert!(plan.services.is_empty());
    assert!(plan.activated.is_empty());
    assert!(validate(&plan, &inst).passed());
}

#[test]
fn e2e_takes_the_slowest_path() {
    let inst = fig1_rate4_instance();
    let mut plan = solved_plan(&inst, Variant::Full);
    let seg = &mut plan.services[0].segments[0];
    seg.paths[0].delay = 2.0;
    seg.paths[1].delay = 3.0;
    let nfv = plan.services[0].delay.nfv;
    assert_eq!(e2e_delay(&plan, "I").unwrap() - nfv, 3.0 + 1.0);
}

#[test]
fn zero_delays_give_zero_latency() {
    let mut inst = fig1_instance();
    for l in &mut inst.links {
        l.delay = 0.0;
    }
    for c in &mut inst.cloud_nodes {
        for f in &mut c.functions {
            f.delay = 0.0;
        }
    }
    let plan = solved_plan(&inst, Variant::Full);
    assert_eq!(e2e_delay(&plan, "I").unwrap(), 0.0);
}

#[test]
fn unknown_service_is_an_error() {
    let plan = solved_plan(&fig1_instance(), Variant::Full);
    assert_eq!(e2e_delay(&plan, "nope"), Err(PlanError::UnknownService("nope".into())));
}

#[test]
fn two_functions_on_one_node_fail() {
    let mut inst = fig1_instance();
    inst.services[0].chain = vec!["f1".into(), "f2".into()];
    inst.services[0].rates = vec![1.0, 1.0, 1.0];
    inst.services.truncate(1);
    let plan = SlicePlan {
        variant: Variant::Full,
        path_budget: 2,
        services: vec![ServicePlan {
            id: "I".into(),
            placements: vec![
                Placement {
                    position: 1,
                    function: "f1".into(),
                    node: "E".into(),
                },
                Placement {
                    position: 2,
                    function: "f2".into(),
                    node: "E".into(),
                },
            ],
            segments: vec![
                seg(0, "A", "E", &["A", "B", "E"]),
                Segment {
                    index: 1,
                    from: "E".into(),
                    to: "E".into(),
                    rate: 1.0,
                    paths: vec![],
                    delay: 0.0,
                },
                seg(2, "E", "D", &["E", "D"]),
            ],
            delay: DelayReport {
                communication: 0.0,
                nfv: 0.0,
                total: 0.0,
            },
        }],
        activated: vec!["E".into()],
        power: PowerReport::compute(&inst, 1, PowerParams::default()),
        warnings: vec![],
    };
    let report = validate(&plan, &inst);
    assert!(!report.check("one_function_per_node").unwrap().passed);
}

fn seg(index: usize, from: &str, to: &str, nodes: &[&str]) -> Segment {
    Segment {
        index,
        from: from.into(),
        to: to.into(),
        rate: 1.0,
        paths: vec![RoutedPath {
            nodes: nodes.iter().map(|s| s.to_string()).collect(),
            rate: 1.0,
            delay: 0.0,
        }],
        delay: 0.0,
    }
}

#[test]
fn mutations_are_caught() {
    let inst = fig1_instance();
    let plan = solved_plan(&inst, Variant::Full);

    let mut more = plan.clone();
    more.services[0].segments[0].paths[0].rate += 1.0;
    assert!(!validate(&more, &inst).passed());

    let mut swapped = plan.clone();
    swapped.services[1].placements[0].node = "E".into();
    assert!(!validate(&swapped, &inst).passed());

    let mut dropped = plan.clone();
    dropped.services[1].segments[1].paths.clear();
    let report = validate(&dropped, &inst);
    assert!(!report.check("segment_rate").unwrap().passed);
}

#[test]
fn power_report_identity() {
    let inst = fig1_instance();
    let plan = solved_plan(&inst, Variant::Full);
    let p = plan.power;
    let expected = 10.0 * 2.0 + 1.0 * (2.0 - 2.0) + 1.0 * 2.0;
    assert_eq!(p.total, expected);
    assert_eq!(p.total, (p.params.beta1 - p.params.beta2) * 2.0 + p.constant);
}

#[test]
fn plan_json_round_trip() {
    let plan = solved_plan(&fig1_instance(), Variant::Full);
    assert_eq!(SlicePlan::from_json(&plan.to_json()).unwrap(), plan);
}

#[test]
fn report_text_has_one_line_per_family() {
    let plan = solved_plan(&fig1_instance(), Variant::Full);
    let text = validate(&plan, &fig1_instance()).to_string();
    assert_eq!(text.lines().count(), VALIDATED_FAMILIES.len());
    assert!(text.lines().all(|l| l.contains("PASS")));
}

#[test]
fn decompose_cancels_cycles() {
    // 0 -> 1 -> 2 with a circulation 1 -> 3 -> 1
    let arcs = [(0, 1, 1.0), (1, 2, 1.0), (1, 3, 1.0), (3, 1, 1.0)];
    let mut r = vec![1.0, 1.0, 2.0, 2.0];
    let parts = decompose(&arcs, &mut r, 0, 2);
    assert_eq!(parts, vec![(vec![0, 1, 2], 1.0)]);
    assert!(r.iter().all(|&x| x.abs() < 1e-12));
}

#[test]
fn decode_requires_an_assignment() {
    let inst = fig1_instance();
    let model = build_variant(&inst, Variant::Full).unwrap();
    let sol = MblpSolution {
        status: MblpStatus::Infeasible,
        values: vec![],
        objective: f64::INFINITY,
        stats: Default::default(),
    };
    assert!(matches!(decode(&model, &sol, &inst), Err(DecodeError::NoSolution(_))));
}

#[test]
fn decompose_strips_circulation_through_the_path() {
    // Net 0.25 from 0 to 2 along 0 -> 1 -> 2, with 0.75 running back
    // 2 -> 1 -> 0 on top of it.
    let arcs = [(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)];
    let mut r = vec![1.0, 0.75, 1.0, 0.75];
    let parts = decompose(&arcs, &mut r, 0, 2);
    assert_eq!(parts.len(), 1);
    assert_eq!(parts[0].0, vec![0, 1, 2]);
    assert!((parts[0].1 - 0.25).abs() < 1e-12);
    assert!(r.iter().all(|&x| x.abs() < 1e-12));
}
