//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.
//!
//! Studies use a node-only budget so that reruns are reproducible; set
//! `NFVSLICE_ACCEPTANCE_NODES` to change it.

use std::time::{Duration, Instant};

use nfvslice::formulation::{build_variant, ModelIR, NameTable, VarKey, Variant};
use nfvslice::harness::{
    run_delay_study, run_feasibility_study, run_variant, ExperimentReport, RunStatus, StudyConfig,
};
use nfvslice::instancegen::{fig1_instance, fig1_rate4_instance, generate, generate_micro, GenConfig};
use nfvslice::mblp::{brute_force_mblp, solve_mblp, Budget, MblpSolution, MblpStatus};
use nfvslice::net_model::Instance;
use nfvslice::solution::{decode, e2e_delay, validate, SlicePlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIG1_BUDGET: u64 = 100_000;
const MICRO_CAP: usize = 22;
const MICRO_COUNT: u64 = 50;
const DEFAULT_STUDY_NODES: u64 = 2_000;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            passed: true,
            detail: String::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.passed = false;
            if !self.detail.is_empty() {
                self.detail.push_str("; ");
            }
            self.detail.push_str(&what.into());
        }
    }

    fn note(&mut self, text: impl Into<String>) {
        if self.passed {
            if !self.detail.is_empty() {
                self.detail.push_str("; ");
            }
            self.detail.push_str(&text.into());
        }
    }
}

/// Plans decoded along the way, kept for the validator criterion.
#[derive(Default)]
struct Collected {
    plans: Vec<(String, Instance, SlicePlan, Variant)>,
    reports: Vec<ExperimentReport>,
}

fn solve(inst: &Instance, variant: Variant) -> (ModelIR, MblpSolution) {
    let model = build_variant(inst, variant).expect("model builds");
    let sol = solve_mblp(&model, Budget::nodes(FIG1_BUDGET)).expect("solver runs");
    (model, sol)
}

fn placement(plan: &SlicePlan, id: &str) -> Vec<String> {
    plan.service(id)
        .map(|s| s.placements.iter().map(|p| p.node.clone()).collect())
        .unwrap_or_default()
}

fn criterion_1(c: &mut Collected) -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let inst = fig1_instance();
    let (model, sol) = solve(&inst, Variant::Full);
    o.check(
        sol.status == MblpStatus::Optimal,
        format!("status {}", sol.status.as_str()),
    );
    o.check(sol.objective == 2.0, format!("objective {}", sol.objective));
    if let Ok(plan) = decode(&model, &sol, &inst) {
        o.check(
            placement(&plan, "I") == ["E"],
            format!("f1 placed at {:?}", placement(&plan, "I")),
        );
        o.check(
            placement(&plan, "II") == ["C"],
            format!("f2 placed at {:?}", placement(&plan, "II")),
        );
        let d1 = e2e_delay(&plan, "I").unwrap_or(f64::NAN);
        let d2 = e2e_delay(&plan, "II").unwrap_or(f64::NAN);
        o.check((d1 - 4.0).abs() <= 1e-6, format!("service I delay {d1}"));
        o.check((d2 - 3.0).abs() <= 1e-6, format!("service II delay {d2}"));
        o.note(format!("objective 2, delays {d1} and {d2}"));
        c.plans.push(("fig1 full".into(), inst, plan, Variant::Full));
    } else {
        o.check(false, "decode failed");
    }
    let t = start.elapsed();
    o.check(t < Duration::from_secs(5), format!("runtime {t:?}"));
    o
}

fn criterion_2(c: &mut Collected) -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let inst = fig1_instance();
    let (model, sol) = solve(&inst, Variant::NoLatency);
    o.check(
        sol.status == MblpStatus::Optimal,
        format!("status {}", sol.status.as_str()),
    );
    o.check(sol.objective == 1.0, format!("objective {}", sol.objective));
    match decode(&model, &sol, &inst) {
        Ok(plan) => {
            o.check(plan.activated == ["E"], format!("activated {:?}", plan.activated));
            let d2 = e2e_delay(&plan, "II").unwrap_or(f64::NAN);
            let limit = inst.services[1].latency_threshold;
            o.check(
                (d2 - 5.0).abs() <= 1e-6 && d2 > limit,
                format!("service II delay {d2} vs {limit}"),
            );
            let report = validate(&plan, &inst);
            let e2e = report.check("e2e_latency");
            o.check(
                e2e.is_some_and(|c| !c.passed && c.offending == ["II"]),
                "post-check did not flag service II",
            );
            c.plans
                .push(("fig1 no-latency".into(), inst.clone(), plan, Variant::NoLatency));
        }
        Err(e) => o.check(false, format!("decode failed: {e}")),
    }
    let run = run_variant(&inst, Variant::NoLatency, Budget::nodes(FIG1_BUDGET));
    o.check(
        !run.feasible && run.post_check == Some(false),
        "study post-check counted the instance feasible",
    );
    o.note("objective 1, service II delay 5 > 3, post-check infeasible");
    let t = start.elapsed();
    o.check(t < Duration::from_secs(5), format!("runtime {t:?}"));
    o
}

fn criterion_3(c: &mut Collected) -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let inst = fig1_rate4_instance();
    let (_, single) = solve(&inst, Variant::SinglePath);
    o.check(
        single.status == MblpStatus::Infeasible,
        format!("single-path status {}", single.status.as_str()),
    );
    let (model, full) = solve(&inst, Variant::Full);
    o.check(
        full.status == MblpStatus::Optimal,
        format!("full status {}", full.status.as_str()),
    );
    match decode(&model, &full, &inst) {
        Ok(plan) => {
            let svc = &plan.services[0];
            let mut seg0: Vec<(String, f64)> = svc.segments[0]
                .paths
                .iter()
                .map(|p| (p.nodes.join("->"), p.rate))
                .collect();
            seg0.sort_by(|a, b| a.0.cmp(&b.0));
            let want = vec![("A->B->E".to_string(), 2.0), ("A->C->E".to_string(), 2.0)];
            let same = seg0.len() == 2
                && seg0
                    .iter()
                    .zip(&want)
                    .all(|(a, b)| a.0 == b.0 && (a.1 - b.1).abs() <= 1e-6);
            o.check(same, format!("segment 0 paths {seg0:?}"));
            let d = e2e_delay(&plan, &svc.id).unwrap_or(f64::NAN);
            o.check(d <= 4.0 + 1e-6, format!("delay {d}"));
            o.note(format!("single-path infeasible, full splits {{2, 2}}, delay {d}"));
            c.plans.push(("fig1 rate-4 full".into(), inst, plan, Variant::Full));
        }
        Err(e) => o.check(false, format!("decode failed: {e}")),
    }
    let t = start.elapsed();
    o.check(t < Duration::from_secs(5), format!("runtime {t:?}"));
    o
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let mut optimal = 0;
    for seed in 0..MICRO_COUNT {
        let inst = generate_micro(seed, MICRO_CAP);
        let model = build_variant(&inst, Variant::Full).expect("micro model builds");
        o.check(
            model.num_binaries() <= MICRO_CAP,
            format!("seed {seed}: {} binaries", model.num_binaries()),
        );
        let bb = solve_mblp(&model, Budget::nodes(FIG1_BUDGET)).expect("solver runs");
        let bf = brute_force_mblp(&model, MICRO_CAP).expect("enumeration runs");
        o.check(
            bb.status == bf.status,
            format!("seed {seed}: {} vs {}", bb.status.as_str(), bf.status.as_str()),
        );
        if bb.status == MblpStatus::Optimal {
            optimal += 1;
            o.check(
                bb.objective == bf.objective,
                format!("seed {seed}: {} vs {}", bb.objective, bf.objective),
            );
        }
    }
    let t = start.elapsed();
    o.check(t < Duration::from_secs(600), format!("runtime {t:?}"));
    o.note(format!("{MICRO_COUNT} instances, {optimal} optimal, {t:.1?}"));
    o
}

fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    // Truth table on a bare product.
    let mut m = ModelIR::new(Variant::Full, 1, NameTable::default());
    let a = m.add_binary(VarKey::X { k: 0, s: 1, v: 0 }).unwrap();
    let b = m.add_binary(VarKey::X { k: 0, s: 2, v: 1 }).unwrap();
    let w = m
        .linearize_product(&VarKey::X { k: 0, s: 1, v: 0 }, &VarKey::X { k: 0, s: 2, v: 1 })
        .unwrap();
    for va in [0.0, 1.0] {
        for vb in [0.0, 1.0] {
            let feasible: Vec<f64> = [0.0, 1.0]
                .into_iter()
                .filter(|&vw| {
                    let mut x = vec![0.0; m.num_columns()];
                    x[a] = va;
                    x[b] = vb;
                    x[w] = vw;
                    m.max_violation(&x) <= 0.0
                })
                .collect();
            o.check(feasible == [va * vb], format!("a={va} b={vb}: feasible w {feasible:?}"));
        }
    }

    // Sampled triples from solved models.
    let mut triples = Vec::new();
    let mut instances = vec![fig1_instance(), fig1_rate4_instance()];
    for seed in 0..20 {
        for sc in 1..=2 {
            instances.push(
                generate(&GenConfig {
                    seed,
                    service_count: sc,
                    ..GenConfig::default()
                })
                .unwrap(),
            );
        }
    }
    for inst in &instances {
        for variant in Variant::ALL {
            let model = build_variant(inst, variant).unwrap();
            let sol = solve_mblp(&model, Budget::nodes(2_000)).unwrap();
            if !sol.has_solution() {
                continue;
            }
            for (j, col) in model.columns.iter().enumerate() {
                if let VarKey::Omega { k, s, vs, vt } = col.key {
                    let x1 = sol.value(&model, &VarKey::X { k, s, v: vs }).unwrap();
                    let x2 = sol.value(&model, &VarKey::X { k, s: s + 1, v: vt }).unwrap();
                    triples.push((sol.values[j], x1, x2));
                }
            }
        }
    }
    o.check(!triples.is_empty(), "no product columns in solved models");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        if triples.is_empty() {
            break;
        }
        let (wv, x1, x2) = triples[rng.gen_range(0..triples.len())];
        worst = worst.max((wv - x1 * x2).abs());
    }
    o.check(worst <= 1e-6, format!("worst |w - x x'| = {worst:e}"));
    o.note(format!(
        "truth table exact; 1000 samples from {} triples, worst {worst:e}",
        triples.len()
    ));
    o
}

fn study_config() -> StudyConfig {
    let nodes = std::env::var("NFVSLICE_ACCEPTANCE_NODES")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_STUDY_NODES);
    StudyConfig {
        service_counts: vec![1, 2, 3, 4],
        instances_per_point: 20,
        base_seed: 0,
        node_limit: nodes,
        time_limit_secs: None,
        ..StudyConfig::default()
    }
}

fn criterion_6(c: &mut Collected, elapsed: &mut Duration) -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let report = match run_feasibility_study(&study_config()) {
        Ok(r) => r,
        Err(e) => {
            o.check(false, e.to_string());
            return o;
        }
    };
    let mut strict = false;
    let mut table = Vec::new();
    for p in &report.points {
        o.check(
            p.instances == 20,
            format!("{} services: {} rows", p.service_count, p.instances),
        );
        o.check(
            p.feasible_full >= p.feasible_single_path,
            format!(
                "{} services: full {} < single-path {}",
                p.service_count, p.feasible_full, p.feasible_single_path
            ),
        );
        o.check(
            p.feasible_full >= p.feasible_no_latency_post_check,
            format!(
                "{} services: full {} < no-latency {}",
                p.service_count, p.feasible_full, p.feasible_no_latency_post_check
            ),
        );
        strict |= p.feasible_full > p.feasible_single_path || p.feasible_full > p.feasible_no_latency_post_check;
        table.push(format!(
            "{}:{}/{}/{}",
            p.service_count, p.feasible_full, p.feasible_single_path, p.feasible_no_latency_post_check
        ));
    }
    o.check(strict, "no strict inequality anywhere");
    *elapsed += start.elapsed();
    o.note(format!(
        "full/single/no-latency feasible per service count {}",
        table.join(" ")
    ));
    println!("{}", report.points_csv().trim_end());
    c.reports.push(report);
    o
}

fn criterion_7(c: &mut Collected, elapsed: &mut Duration) -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let report = match run_delay_study(&study_config()) {
        Ok(r) => r,
        Err(e) => {
            o.check(false, e.to_string());
            return o;
        }
    };
    let means: Vec<(usize, f64)> = report
        .points
        .iter()
        .filter_map(|p| p.mean_activated.map(|m| (p.service_count, m)))
        .collect();
    for w in means.windows(2) {
        o.check(
            w[1].1 >= w[0].1,
            format!("mean activated drops from {} to {}", w[0].1, w[1].1),
        );
    }
    for row in &report.rows {
        for run in &row.runs {
            if let Some(d) = run.delays {
                o.check(
                    (d.total - d.nfv - d.communication).abs() <= 1e-9,
                    format!(
                        "seed {} services {}: total {} != nfv + comm",
                        row.seed, row.service_count, d.total
                    ),
                );
            }
        }
    }
    for p in &report.points {
        if let Some(nfv) = p.mean_nfv_delay {
            o.check(
                (2.4..=3.6).contains(&nfv),
                format!("{} services: mean NFV delay {nfv}", p.service_count),
            );
        }
    }
    let undefined: Vec<usize> = report
        .points
        .iter()
        .filter(|p| p.mean_activated.is_none())
        .map(|p| p.service_count)
        .collect();
    *elapsed += start.elapsed();
    o.check(
        *elapsed < Duration::from_secs(3600),
        format!("studies took {elapsed:?}"),
    );
    o.note(format!(
        "mean activated {:?}; no feasible instance at service counts {undefined:?}; studies {:.1?}",
        means, elapsed
    ));
    println!("{}", report.points_csv().trim_end());
    c.reports.push(report);
    o
}

fn mutants(plan: &SlicePlan) -> Vec<(&'static str, SlicePlan)> {
    let mut out = Vec::new();
    let mut more = plan.clone();
    if let Some(p) = more
        .services
        .iter_mut()
        .flat_map(|s| s.segments.iter_mut())
        .flat_map(|s| s.paths.iter_mut())
        .next()
    {
        p.rate += 1.0;
        out.push(("rate +1", more));
    }
    // Move the first placement onto another service's node, or onto any
    // other activated node.
    let mut swapped = plan.clone();
    let nodes: Vec<String> = plan
        .services
        .iter()
        .flat_map(|s| s.placements.iter().map(|p| p.node.clone()))
        .collect();
    if let Some(first) = swapped.services.first_mut().and_then(|s| s.placements.first_mut()) {
        if let Some(other) = nodes.iter().chain(&plan.activated).find(|n| **n != first.node) {
            first.node = other.clone();
            out.push(("swapped placement", swapped));
        }
    }
    let mut dropped = plan.clone();
    if let Some(seg) = dropped
        .services
        .iter_mut()
        .flat_map(|s| s.segments.iter_mut())
        .find(|s| !s.paths.is_empty())
    {
        seg.paths.remove(0);
        out.push(("dropped path", dropped));
    }
    out
}

fn criterion_8(c: &Collected) -> Outcome {
    let mut o = Outcome::new();
    let mut checked = 0;
    for (label, inst, plan, variant) in &c.plans {
        let report = validate(plan, inst);
        let failures: Vec<&str> = report
            .checks
            .iter()
            .filter(|x| !x.passed && !(*variant == Variant::NoLatency && x.family == "e2e_latency"))
            .map(|x| x.family.as_str())
            .collect();
        o.check(failures.is_empty(), format!("{label}: failing {failures:?}"));
        let baseline = report.failures();
        for (name, m) in mutants(plan) {
            let r = validate(&m, inst);
            o.check(
                r.failures() > baseline,
                format!("{label}: mutation '{name}' not caught"),
            );
            checked += 1;
        }
    }
    let mut optimal = 0;
    for report in &c.reports {
        for row in &report.rows {
            o.check(row.error.is_none(), format!("seed {}: {:?}", row.seed, row.error));
            for run in &row.runs {
                o.check(
                    run.error.is_none(),
                    format!("seed {} {}: {:?}", row.seed, run.variant.as_str(), run.error),
                );
                if run.status == RunStatus::Optimal {
                    optimal += 1;
                    o.check(
                        run.validation_failures == Some(0),
                        format!(
                            "seed {} {}: {:?} failures",
                            row.seed,
                            run.variant.as_str(),
                            run.validation_failures
                        ),
                    );
                    if run.variant != Variant::NoLatency {
                        o.check(
                            run.feasible,
                            format!("seed {} {}: optimal but not validated", row.seed, run.variant.as_str()),
                        );
                    }
                }
            }
        }
    }
    o.note(format!(
        "{} fixture plans and {optimal} optimal study solves validated; {checked} mutations caught",
        c.plans.len()
    ));
    o
}

fn criterion_9(c: &Collected) -> Outcome {
    let mut o = Outcome::new();
    // Fixture plans.
    for (label, inst, plan, variant) in &c.plans {
        let (model, sol) = solve(inst, *variant);
        match decode(&model, &sol, inst) {
            Ok(again) => o.check(again.to_json() == plan.to_json(), format!("{label}: plan differs")),
            Err(e) => o.check(false, format!("{label}: {e}")),
        }
    }
    // Study report files.
    let rerun = [run_feasibility_study(&study_config()), run_delay_study(&study_config())];
    let dir = std::env::temp_dir().join(format!("nfvslice-acceptance-{}", std::process::id()));
    for (first, second) in c.reports.iter().zip(rerun) {
        let Ok(second) = second else {
            o.check(false, "rerun failed");
            continue;
        };
        let a = first.write_files(&dir.join("a"), &first.study);
        let b = second.write_files(&dir.join("b"), &second.study);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                for (x, y) in a.iter().zip(&b) {
                    let same = std::fs::read(x).ok() == std::fs::read(y).ok();
                    o.check(same, format!("{} differs", x.file_name().unwrap().to_string_lossy()));
                }
            }
            _ => o.check(false, "could not write reports"),
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    o.note("plans and study reports byte-identical across reruns");
    o
}

fn main() {
    let mut collected = Collected::default();
    let mut study_time = Duration::ZERO;
    let mut failed = 0;
    let mut report = |n: usize, name: &str, o: Outcome| {
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {n} {verdict}: {name} ({})", o.detail);
        if !o.passed {
            failed += 1;
        }
    };
    report(1, "fig1 latency-aware plan", criterion_1(&mut collected));
    report(2, "fig1 no-latency post-check", criterion_2(&mut collected));
    report(3, "fig1 rate-4 multi-path split", criterion_3(&mut collected));
    report(4, "oracle equivalence on micro-instances", criterion_4());
    report(5, "product linearization", criterion_5());
    report(
        6,
        "feasibility ordering study",
        criterion_6(&mut collected, &mut study_time),
    );
    report(7, "delay trend study", criterion_7(&mut collected, &mut study_time));
    report(8, "validator completeness", criterion_8(&collected));
    report(9, "determinism", criterion_9(&collected));
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
