//! Seeded comparative studies over generated instances.
//!
//! Every `(instance, variant)` solve is independent, so the runner farms them
//! out to a worker pool and reassembles the results in seed order. Reports
//! carry no timing data, which keeps them byte-identical across runs.

use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{build_variant, Variant};
use crate::instancegen::{generate, GenConfig};
use crate::mblp::{solve_mblp, Budget, MblpStatus};
use crate::net_model::Instance;
use crate::solution::{decode, validate, SlicePlan};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "NFVSLICE_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    /// Generator settings; `seed` and `service_count` are overridden per
    /// instance.
    pub template: GenConfig,
    pub service_counts: Vec<usize>,
    pub instances_per_point: usize,
    /// Instance `i` of every point uses seed `base_seed + i`.
    pub base_seed: u64,
    pub node_limit: u64,
    /// Per-solve wall-clock limit. Leave unset for reproducible reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit_secs: Option<f64>,
    /// Worker threads; falls back to `NFVSLICE_WORKERS`, then to the number
    /// of CPUs.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            template: GenConfig::default(),
            service_counts: vec![1, 2, 3, 4],
            instances_per_point: 20,
            base_seed: 0,
            node_limit: 200_000,
            time_limit_secs: Some(60.0),
            workers: None,
        }
    }
}

impl StudyConfig {
    pub fn budget(&self) -> Budget {
        Budget {
            node_limit: self.node_limit,
            time_limit: self.time_limit_secs.map(Duration::from_secs_f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Optimal,
    Infeasible,
    BudgetExceeded,
    Error,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Optimal => "optimal",
            RunStatus::Infeasible => "infeasible",
            RunStatus::BudgetExceeded => "budget_exceeded",
            RunStatus::Error => "error",
        }
    }
}

/// Delays averaged over the services of one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySummary {
    pub nfv: f64,
    pub communication: f64,
    pub total: f64,
}

/// Outcome of one variant on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRun {
    pub variant: Variant,
    pub status: RunStatus,
    /// Objective of the best assignment found, if any.
    pub objective: Option<f64>,
    /// Counted as feasible in the study. For the no-latency variant this is
    /// the post-check verdict: the plan must also meet every threshold.
    pub feasible: bool,
    /// No-latency only: whether the decoded plan meets every threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_check: Option<bool>,
    pub activated: Option<usize>,
    pub delays: Option<DelaySummary>,
    /// Validator failures outside the latency family.
    pub validation_failures: Option<usize>,
    pub nodes: u64,
    pub lp_solves: u64,
    pub lp_iterations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRow {
    pub seed: u64,
    pub service_count: usize,
    pub runs: Vec<VariantRun>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl InstanceRow {
    pub fn run(&self, variant: Variant) -> Option<&VariantRun> {
        self.runs.iter().find(|r| r.variant == variant)
    }
}

/// Aggregates for one service count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub service_count: usize,
    pub instances: usize,
    pub feasible_full: usize,
    pub feasible_single_path: usize,
    pub feasible_no_latency_post_check: usize,
    pub budget_exceeded: usize,
    /// Means over instances the full model solved; `None` when there are
    /// none.
    pub mean_activated: Option<f64>,
    pub mean_nfv_delay: Option<f64>,
    pub mean_communication_delay: Option<f64>,
    pub mean_total_delay: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub study: String,
    pub config: StudyConfig,
    pub variants: Vec<Variant>,
    pub rows: Vec<InstanceRow>,
    pub points: Vec<PointSummary>,
    /// Cases where single-path was feasible but full exhausted its budget.
    pub notes: Vec<String>,
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid study configuration: {0}")]
    InvalidConfig(String),
    #[error("seed {seed}, {services} services: single-path is feasible ({single}) but full is {full}")]
    Inconsistent {
        seed: u64,
        services: usize,
        single: f64,
        full: String,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Solves full, single-path and no-latency on every instance and counts
/// feasible instances per service count.
pub fn run_feasibility_study(cfg: &StudyConfig) -> Result<ExperimentReport, StudyError> {
    run_study("feasibility", cfg, &Variant::ALL)
}

/// Solves the full model on every instance; aggregates cover the instances
/// it solved.
pub fn run_delay_study(cfg: &StudyConfig) -> Result<ExperimentReport, StudyError> {
    run_study("delay", cfg, &[Variant::Full])
}

fn run_study(name: &str, cfg: &StudyConfig, variants: &[Variant]) -> Result<ExperimentReport, StudyError> {
    cfg.template
        .validate()
        .map_err(|e| StudyError::InvalidConfig(e.to_string()))?;
    let mut instances: Vec<(u64, usize, Result<Instance, String>)> = Vec::new();
    for &sc in &cfg.service_counts {
        for i in 0..cfg.instances_per_point {
            let seed = cfg.base_seed + i as u64;
            let gen = GenConfig {
                seed,
                service_count: sc,
                ..cfg.template.clone()
            };
            instances.push((seed, sc, generate(&gen).map_err(|e| e.to_string())));
        }
    }
    let tasks: Vec<(usize, Variant)> = instances
        .iter()
        .enumerate()
        .filter(|(_, inst)| inst.2.is_ok())
        .flat_map(|(i, _)| variants.iter().map(move |&v| (i, v)))
        .collect();
    let budget = cfg.budget();
    let solve = |&(i, v): &(usize, Variant)| {
        let inst = instances[i].2.as_ref().expect("filtered above");
        run_variant(inst, v, budget)
    };
    let results = map_tasks(&tasks, solve, cfg.workers)?;

    let mut rows: Vec<InstanceRow> = instances
        .iter()
        .map(|(seed, sc, inst)| InstanceRow {
            seed: *seed,
            service_count: *sc,
            runs: Vec::new(),
            error: inst.as_ref().err().cloned(),
        })
        .collect();
    for (&(i, _), run) in tasks.iter().zip(results) {
        rows[i].runs.push(run);
    }
    rows.sort_by_key(|r| (r.service_count, r.seed));

    let mut notes = Vec::new();
    for row in &rows {
        check_consistency(row, &mut notes)?;
    }
    let points = cfg
        .service_counts
        .iter()
        .map(|&sc| summarize(sc, rows.iter().filter(|r| r.service_count == sc)))
        .collect();
    Ok(ExperimentReport {
        study: name.to_string(),
        config: cfg.clone(),
        variants: variants.to_vec(),
        rows,
        points,
        notes,
    })
}

#[cfg(feature = "parallel")]
fn map_tasks<T: Sync, R: Send>(
    tasks: &[T],
    f: impl Fn(&T) -> R + Sync + Send,
    workers: Option<usize>,
) -> Result<Vec<R>, StudyError> {
    use rayon::prelude::*;
    let workers = workers.or_else(workers_from_env).unwrap_or(0);
    if workers == 1 {
        return Ok(tasks.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| StudyError::Pool(e.to_string()))?;
    Ok(pool.install(|| tasks.par_iter().map(f).collect()))
}

#[cfg(not(feature = "parallel"))]
fn map_tasks<T: Sync, R: Send>(
    tasks: &[T],
    f: impl Fn(&T) -> R + Sync + Send,
    _workers: Option<usize>,
) -> Result<Vec<R>, StudyError> {
    Ok(tasks.iter().map(f).collect())
}

/// Worker count from `NFVSLICE_WORKERS`, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
}

/// Builds, solves, decodes and validates one variant of `inst`.
pub fn run_variant(inst: &Instance, variant: Variant, budget: Budget) -> VariantRun {
    let mut run = VariantRun {
        variant,
        status: RunStatus::Error,
        objective: None,
        feasible: false,
        post_check: None,
        activated: None,
        delays: None,
        validation_failures: None,
        nodes: 0,
        lp_solves: 0,
        lp_iterations: 0,
        error: None,
    };
    let model = match build_variant(inst, variant) {
        Ok(m) => m,
        Err(e) => {
            run.error = Some(e.to_string());
            return run;
        }
    };
    let sol = match solve_mblp(&model, budget) {
        Ok(s) => s,
        Err(e) => {
            run.error = Some(e.to_string());
            return run;
        }
    };
    run.nodes = sol.stats.nodes;
    run.lp_solves = sol.stats.lp_solves;
    run.lp_iterations = sol.stats.lp_iterations;
    run.status = match sol.status {
        MblpStatus::Optimal => RunStatus::Optimal,
        MblpStatus::Infeasible => RunStatus::Infeasible,
        MblpStatus::BudgetExceeded => RunStatus::BudgetExceeded,
    };
    if !sol.has_solution() {
        return run;
    }
    run.objective = Some(sol.objective);
    let plan = match decode(&model, &sol, inst) {
        Ok(p) => p,
        Err(e) => {
            run.error = Some(e.to_string());
            return run;
        }
    };
    let report = validate(&plan, inst);
    let meets_thresholds = report.check("e2e_latency").is_some_and(|c| c.passed);
    let other_failures = report
        .checks
        .iter()
        .filter(|c| !c.passed && c.family != "e2e_latency")
        .count();
    run.validation_failures = Some(other_failures);
    run.activated = Some(plan.activated.len());
    run.delays = Some(delay_summary(&plan));
    run.feasible = other_failures == 0
        && if variant.has_latency() {
            meets_thresholds
        } else {
            run.post_check = Some(meets_thresholds);
            meets_thresholds
        };
    run
}

fn delay_summary(plan: &SlicePlan) -> DelaySummary {
    let n = plan.services.len().max(1) as f64;
    let nfv: f64 = plan.services.iter().map(|s| s.delay.nfv).sum::<f64>() / n;
    let communication: f64 = plan.services.iter().map(|s| s.delay.communication).sum::<f64>() / n;
    DelaySummary {
        nfv,
        communication,
        total: nfv + communication,
    }
}

fn check_consistency(row: &InstanceRow, notes: &mut Vec<String>) -> Result<(), StudyError> {
    let (Some(single), Some(full)) = (row.run(Variant::SinglePath), row.run(Variant::Full)) else {
        return Ok(());
    };
    if !single.feasible {
        return Ok(());
    }
    let single_obj = single.objective.unwrap_or(f64::INFINITY);
    match full.status {
        RunStatus::BudgetExceeded | RunStatus::Error if !full.feasible => {
            notes.push(format!(
                "seed {} with {} services: single-path feasible but full ended {}",
                row.seed,
                row.service_count,
                full.status.as_str()
            ));
            Ok(())
        }
        _ if full.feasible
            && full.status == RunStatus::Optimal
            && full.objective.unwrap_or(f64::INFINITY) > single_obj + 1e-9 =>
        {
            Err(StudyError::Inconsistent {
                seed: row.seed,
                services: row.service_count,
                single: single_obj,
                full: format!("optimal with objective {}", full.objective.unwrap_or(f64::NAN)),
            })
        }
        _ if !full.feasible => Err(StudyError::Inconsistent {
            seed: row.seed,
            services: row.service_count,
            single: single_obj,
            full: full.status.as_str().to_string(),
        }),
        _ => Ok(()),
    }
}

fn summarize<'a>(sc: usize, rows: impl Iterator<Item = &'a InstanceRow>) -> PointSummary {
    let rows: Vec<&InstanceRow> = rows.collect();
    let count = |v: Variant| rows.iter().filter(|r| r.run(v).is_some_and(|x| x.feasible)).count();
    let solved: Vec<&VariantRun> = rows
        .iter()
        .filter_map(|r| r.run(Variant::Full))
        .filter(|x| x.feasible)
        .collect();
    let mean = |f: &dyn Fn(&VariantRun) -> f64| {
        (!solved.is_empty()).then(|| solved.iter().map(|x| f(x)).sum::<f64>() / solved.len() as f64)
    };
    PointSummary {
        service_count: sc,
        instances: rows.len(),
        feasible_full: count(Variant::Full),
        feasible_single_path: count(Variant::SinglePath),
        feasible_no_latency_post_check: count(Variant::NoLatency),
        budget_exceeded: rows
            .iter()
            .flat_map(|r| &r.runs)
            .filter(|x| x.status == RunStatus::BudgetExceeded)
            .count(),
        mean_activated: mean(&|x| x.activated.unwrap_or(0) as f64),
        mean_nfv_delay: mean(&|x| x.delays.map_or(0.0, |d| d.nfv)),
        mean_communication_delay: mean(&|x| x.delays.map_or(0.0, |d| d.communication)),
        mean_total_delay: mean(&|x| x.delays.map_or(0.0, |d| d.total)),
    }
}

/// Column order of [`ExperimentReport::rows_csv`].
pub const ROWS_CSV_HEADER: &str = "seed,service_count,variant,status,objective,feasible,post_check,activated,nfv_delay,communication_delay,total_delay,validation_failures,nodes,lp_solves,lp_iterations";

/// Column order of [`ExperimentReport::points_csv`].
pub const POINTS_CSV_HEADER: &str = "service_count,instances,feasible_full,feasible_single_path,feasible_no_latency_post_check,budget_exceeded,mean_activated,mean_nfv_delay,mean_communication_delay,mean_total_delay";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    /// One line per `(instance, variant)`.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from(ROWS_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            for r in &row.runs {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    row.seed,
                    row.service_count,
                    r.variant.as_str(),
                    r.status.as_str(),
                    opt(r.objective),
                    r.feasible,
                    opt(r.post_check),
                    opt(r.activated),
                    opt(r.delays.map(|d| d.nfv)),
                    opt(r.delays.map(|d| d.communication)),
                    opt(r.delays.map(|d| d.total)),
                    opt(r.validation_failures),
                    r.nodes,
                    r.lp_solves,
                    r.lp_iterations
                );
            }
        }
        out
    }

    /// One line per service count.
    pub fn points_csv(&self) -> String {
        let mut out = String::from(POINTS_CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                p.service_count,
                p.instances,
                p.feasible_full,
                p.feasible_single_path,
                p.feasible_no_latency_post_check,
                p.budget_exceeded,
                opt(p.mean_activated),
                opt(p.mean_nfv_delay),
                opt(p.mean_communication_delay),
                opt(p.mean_total_delay)
            );
        }
        out
    }

    /// Writes `<stem>.json`, `<stem>_rows.csv` and `<stem>_points.csv`.
    pub fn write_files(&self, dir: &std::path::Path, stem: &str) -> std::io::Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let files = [
            (format!("{stem}.json"), self.to_json()),
            (format!("{stem}_rows.csv"), self.rows_csv()),
            (format!("{stem}_points.csv"), self.points_csv()),
        ];
        let mut paths = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            paths.push(path);
        }
        Ok(paths)
    }
}
