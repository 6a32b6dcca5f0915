//! Exact branch-and-bound over the binary columns of a [`ModelIR`].
//!
//! Nodes are explored best-first by LP bound with deeper nodes first on
//! ties. When every objective coefficient is an integer on a binary column
//! (the activated-node count), a node is fathomed as soon as its bound
//! exceeds `incumbent - 1 + 1e-6`. Incumbents are re-checked against the
//! model rows at `1e-6` before they are accepted.

mod oracle;
mod propagate;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::rc::Rc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{ModelIR, VarKey, VarKind};
use crate::lp::{Basis, LpError, LpStatus, Simplex};

pub use oracle::{brute_force_mblp, DEFAULT_BRUTE_FORCE_CAP};

pub const INTEGRALITY_TOL: f64 = 1e-6;
pub const VERIFY_TOL: f64 = 1e-6;
/// Open nodes beyond this count are queued without a saved basis.
const BASIS_STORE_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MblpStatus {
    Optimal,
    Infeasible,
    BudgetExceeded,
}

impl MblpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MblpStatus::Optimal => "optimal",
            MblpStatus::Infeasible => "infeasible",
            MblpStatus::BudgetExceeded => "budget_exceeded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub node_limit: u64,
    pub time_limit: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            node_limit: 200_000,
            time_limit: Some(Duration::from_secs(60)),
        }
    }
}

impl Budget {
    pub fn nodes(node_limit: u64) -> Self {
        Budget {
            node_limit,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: u64,
    pub lp_solves: u64,
    pub lp_iterations: u64,
    #[serde(skip)]
    pub wall_time: Duration,
    pub root_bound: Option<f64>,
    pub max_depth: u32,
    /// `(node, objective)` each time the incumbent improved.
    pub incumbents: Vec<(u64, f64)>,
    /// Child LP objectives found below their parent's (should stay zero).
    pub bound_regressions: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MblpSolution {
    pub status: MblpStatus,
    /// Column values of the best solution found; empty without one.
    pub values: Vec<f64>,
    /// Objective of `values`, `+inf` without an incumbent.
    pub objective: f64,
    pub stats: SolveStats,
}

impl MblpSolution {
    pub fn has_solution(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, model: &ModelIR, key: &VarKey) -> Option<f64> {
        model.column(key).and_then(|j| self.values.get(j).copied())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MblpError {
    #[error("LP failure with fixings {fixings:?}: {source}")]
    Lp {
        #[source]
        source: LpError,
        fixings: Vec<(usize, f64)>,
    },
    #[error("relaxation is unbounded")]
    Unbounded,
    #[error("{binaries} binary columns exceed the enumeration cap {cap}")]
    CapExceeded { binaries: usize, cap: usize },
}

/// Persistent list of branching decisions shared between siblings.
struct Fix {
    col: usize,
    value: f64,
    parent: Option<Rc<Fix>>,
}

fn collect_fixings(mut f: Option<&Rc<Fix>>) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    while let Some(node) = f {
        out.push((node.col, node.value));
        f = node.parent.as_ref();
    }
    out.reverse();
    out
}

struct Node {
    id: u64,
    depth: u32,
    bound: f64,
    bound_key: i64,
    fixings: Option<Rc<Fix>>,
    basis: Option<Rc<Basis>>,
}

/// Queue key of a bound. With an integer objective every bound in
/// `(n-1, n]` leads to the same outcome, so those bounds tie and the
/// deeper node is taken first.
fn bound_key(bound: f64, integral: bool) -> i64 {
    if bound == f64::NEG_INFINITY {
        i64::MIN
    } else if integral {
        ((bound - 1e-6).ceil() * 1e9) as i64
    } else {
        (bound * 1e9).round() as i64
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    /// Max-heap order: smallest bound, then deepest, then oldest id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound_key
            .cmp(&self.bound_key)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

fn kind_rank(kind: VarKind) -> u8 {
    match kind {
        VarKind::YActivate => 0,
        VarKind::XPlace => 1,
        VarKind::OmegaPairPlace => 2,
        VarKind::ZPathLink => 3,
        _ => 4,
    }
}

fn fractionality(v: f64) -> f64 {
    (v - v.floor()).min(v.ceil() - v)
}

/// Picks the binary column to branch on: most fractional first, then
/// Y before X before OMEGA before Z, then smallest index. `None` when every
/// binary is within the integrality tolerance.
pub fn branching_order(model: &ModelIR, values: &[f64]) -> Option<usize> {
    let mut best: Option<(i64, u8, usize)> = None;
    for (j, col) in model.columns.iter().enumerate() {
        if !col.is_binary() {
            continue;
        }
        let frac = fractionality(values[j]);
        if frac <= INTEGRALITY_TOL {
            continue;
        }
        // distance from 0.5 on a 1e-9 grid so near-ties compare equal
        let key = (-(frac * 1e9).round() as i64, kind_rank(col.key.kind()), j);
        if best.is_none_or(|b| key < b) {
            best = Some(key);
        }
    }
    best.map(|b| b.2)
}

#[derive(Default)]
pub struct SolveOptions<'a> {
    pub budget: Budget,
    /// One line per explored node when set.
    pub trace: Option<&'a mut dyn Write>,
}

pub fn solve_mblp(model: &ModelIR, budget: Budget) -> Result<MblpSolution, MblpError> {
    solve_mblp_with(model, SolveOptions { budget, trace: None })
}

pub fn solve_mblp_with(model: &ModelIR, mut opts: SolveOptions<'_>) -> Result<MblpSolution, MblpError> {
    let start = Instant::now();
    let lp = model.to_linear_program();
    let mut sx = Simplex::new(&lp).map_err(|source| MblpError::Lp {
        source,
        fixings: Vec::new(),
    })?;
    let binaries = model.binary_columns();
    let integral = model.integral_objective();
    let mut stats = SolveStats::default();
    let prop = propagate::Propagator::new(model);
    let mut root_lb: Vec<f64> = model.columns.iter().map(|c| c.lower).collect();
    let mut root_ub: Vec<f64> = model.columns.iter().map(|c| c.upper).collect();
    let root_feasible = prop.run(&mut root_lb, &mut root_ub, None);
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap = BinaryHeap::new();
    let mut next_id = 0u64;
    heap.push(Node {
        id: next_id,
        depth: 0,
        bound: f64::NEG_INFINITY,
        bound_key: i64::MIN,
        fixings: None,
        basis: None,
    });
    next_id += 1;

    let fathomed = |bound: f64, inc: &Option<(f64, Vec<f64>)>| match inc {
        None => false,
        Some((best, _)) if integral => bound > best - 1.0 + 1e-6,
        Some((best, _)) => bound >= best - 1e-6,
    };

    let mut modified: Vec<usize> = Vec::new();
    let mut loaded: Option<Rc<Basis>> = None;
    let mut exhausted = false;
    if !root_feasible {
        heap.clear();
    }

    while let Some(node) = heap.pop() {
        if fathomed(node.bound, &incumbent) {
            continue;
        }
        if stats.nodes >= opts.budget.node_limit || opts.budget.time_limit.is_some_and(|t| start.elapsed() >= t) {
            exhausted = true;
            break;
        }

        for &j in &modified {
            sx.reset_bounds(j);
        }
        modified.clear();
        let fixings = collect_fixings(node.fixings.as_ref());
        let (mut lb, mut ub) = (root_lb.clone(), root_ub.clone());
        for &(j, v) in &fixings {
            lb[j] = v;
            ub[j] = v;
        }
        let fixed_cols: Vec<usize> = fixings.iter().map(|f| f.0).collect();
        if !prop.run(&mut lb, &mut ub, Some(&fixed_cols)) {
            stats.nodes += 1;
            stats.max_depth = stats.max_depth.max(node.depth);
            if let Some(w) = opts.trace.as_mut() {
                let _ = writeln!(
                    w,
                    "node={} depth={} bound={} fixings={} iterations=0 lp=pruned",
                    node.id,
                    node.depth,
                    fmt_bound(node.bound),
                    fixings.len()
                );
            }
            continue;
        }
        for &j in &binaries {
            if lb[j] == ub[j] {
                sx.set_bounds(j, lb[j], ub[j]);
                modified.push(j);
            }
        }
        if let Some(b) = &node.basis {
            if !loaded.as_ref().is_some_and(|l| Rc::ptr_eq(l, b)) {
                sx.restore(b);
            }
        }

        let out = sx.solve().map_err(|source| MblpError::Lp {
            source,
            fixings: fixings.clone(),
        })?;
        loaded = None;
        stats.nodes += 1;
        stats.lp_solves += 1;
        stats.lp_iterations += out.iterations;
        stats.max_depth = stats.max_depth.max(node.depth);
        if let Some(w) = opts.trace.as_mut() {
            let _ = writeln!(
                w,
                "node={} depth={} bound={} fixings={} iterations={} lp={}",
                node.id,
                node.depth,
                fmt_bound(out.objective),
                fixings.len(),
                out.iterations,
                match out.status {
                    LpStatus::Optimal => "optimal",
                    LpStatus::Infeasible => "infeasible",
                    LpStatus::Unbounded => "unbounded",
                }
            );
        }
        match out.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => return Err(MblpError::Unbounded),
            LpStatus::Optimal => {}
        }
        if node.depth == 0 {
            stats.root_bound = Some(out.objective);
        } else if out.objective < node.bound - 1e-6 {
            stats.bound_regressions += 1;
        }
        if fathomed(out.objective, &incumbent) {
            continue;
        }

        match branching_order(model, &out.values) {
            None => {
                let Some(values) = accept_candidate(model, &mut sx, &binaries, &out.values, &mut modified, &mut stats)
                    .map_err(|source| MblpError::Lp {
                        source,
                        fixings: fixings.clone(),
                    })?
                else {
                    continue;
                };
                let obj = model.evaluate(&values);
                if incumbent.as_ref().is_none_or(|(best, _)| obj < best - 1e-9) {
                    stats.incumbents.push((node.id, obj));
                    incumbent = Some((obj, values));
                }
            }
            Some(col) => {
                let basis = if heap.len() < BASIS_STORE_LIMIT {
                    let b = Rc::new(sx.snapshot());
                    loaded = Some(b.clone());
                    Some(b)
                } else {
                    None
                };
                let v = out.values[col];
                let order: [f64; 2] = if v >= 0.5 { [1.0, 0.0] } else { [0.0, 1.0] };
                for value in order {
                    heap.push(Node {
                        id: next_id,
                        depth: node.depth + 1,
                        bound: out.objective,
                        bound_key: bound_key(out.objective, integral),
                        fixings: Some(Rc::new(Fix {
                            col,
                            value,
                            parent: node.fixings.clone(),
                        })),
                        basis: basis.clone(),
                    });
                    next_id += 1;
                }
            }
        }
    }

    stats.wall_time = start.elapsed();
    let status = if exhausted {
        MblpStatus::BudgetExceeded
    } else if incumbent.is_some() {
        MblpStatus::Optimal
    } else {
        MblpStatus::Infeasible
    };
    let (objective, values) = incumbent.unwrap_or((f64::INFINITY, Vec::new()));
    Ok(MblpSolution {
        status,
        values,
        objective,
        stats,
    })
}

fn fmt_bound(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else {
        format!("{x}")
    }
}

/// Rounds binaries of an integral LP point and checks the model. If the
/// rounded point misses a row by more than the tolerance, the continuous
/// part is re-solved with all binaries fixed at their rounded values.
fn accept_candidate(
    model: &ModelIR,
    sx: &mut Simplex,
    binaries: &[usize],
    values: &[f64],
    modified: &mut Vec<usize>,
    stats: &mut SolveStats,
) -> Result<Option<Vec<f64>>, LpError> {
    let mut x = values.to_vec();
    for &j in binaries {
        x[j] = x[j].round();
    }
    if model.max_violation(&x) <= VERIFY_TOL {
        return Ok(Some(x));
    }
    for &j in binaries {
        sx.set_bounds(j, x[j], x[j]);
        modified.push(j);
    }
    let out = sx.solve()?;
    stats.lp_solves += 1;
    stats.lp_iterations += out.iterations;
    if out.status != LpStatus::Optimal {
        return Ok(None);
    }
    let mut y = out.values;
    for &j in binaries {
        y[j] = y[j].round();
    }
    Ok((model.max_violation(&y) <= VERIFY_TOL).then_some(y))
}
