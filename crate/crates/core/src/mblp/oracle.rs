//! Exhaustive reference solver for small models.
//!
//! Every assignment of the binary columns is considered. Partial
//! assignments are pruned only when interval arithmetic over the row
//! activities proves that no completion can satisfy some row, so the
//! search stays exhaustive. Each complete assignment solves the remaining
//! continuous LP from scratch.

use std::time::Instant;

use super::{MblpError, MblpSolution, MblpStatus, SolveStats};
use crate::formulation::ModelIR;
use crate::lp::{solve_lp, LpStatus, Relation};

pub const DEFAULT_BRUTE_FORCE_CAP: usize = 22;

const PROP_TOL: f64 = 1e-9;

/// Minimum and maximum activity of a row, with unbounded parts counted
/// separately so that `0 * inf` never appears.
#[derive(Clone, Copy, Default)]
struct Activity {
    min: f64,
    min_inf: u32,
    max: f64,
    max_inf: u32,
}

fn activity(coeffs: &[(usize, f64)], lo: &[f64], hi: &[f64]) -> Activity {
    let mut a = Activity::default();
    for &(j, c) in coeffs {
        let (l, u) = (lo[j], hi[j]);
        let (mn, mx) = if c >= 0.0 { (l, u) } else { (u, l) };
        if mn.is_finite() {
            a.min += c * mn;
        } else {
            a.min_inf += 1;
        }
        if mx.is_finite() {
            a.max += c * mx;
        } else {
            a.max_inf += 1;
        }
    }
    a
}

/// Tightens binary bounds until a fixpoint. Returns `false` when some row
/// cannot be satisfied by any completion.
fn propagate(model: &ModelIR, binary: &[bool], lo: &mut [f64], hi: &mut [f64]) -> bool {
    loop {
        let mut changed = false;
        for row in &model.constraints {
            let act = activity(&row.coeffs, lo, hi);
            let need_le = matches!(row.relation, Relation::Le | Relation::Eq);
            let need_ge = matches!(row.relation, Relation::Ge | Relation::Eq);
            if need_le && act.min_inf == 0 && act.min > row.rhs + PROP_TOL {
                return false;
            }
            if need_ge && act.max_inf == 0 && act.max < row.rhs - PROP_TOL {
                return false;
            }
            for &(j, c) in &row.coeffs {
                if !binary[j] || lo[j] == hi[j] {
                    continue;
                }
                // Raising a free binary from 0 to 1 moves the activity by c.
                if need_le && act.min_inf == 0 {
                    // min activity with this column at the value that
                    // increases it: for c>0 that is 1, for c<0 that is 0
                    if act.min + c.abs() > row.rhs + PROP_TOL {
                        if c > 0.0 {
                            hi[j] = 0.0;
                        } else {
                            lo[j] = 1.0;
                        }
                        changed = true;
                        continue;
                    }
                }
                if need_ge && act.max_inf == 0 && act.max - c.abs() < row.rhs - PROP_TOL {
                    if c > 0.0 {
                        lo[j] = 1.0;
                    } else {
                        hi[j] = 0.0;
                    }
                    changed = true;
                }
            }
        }
        if !changed {
            return true;
        }
    }
}

/// Enumerates the binary columns (at most `cap` of them) and returns the
/// best objective found, first-found on ties.
pub fn brute_force_mblp(model: &ModelIR, cap: usize) -> Result<MblpSolution, MblpError> {
    let start = Instant::now();
    let binaries = model.binary_columns();
    if binaries.len() > cap {
        return Err(MblpError::CapExceeded {
            binaries: binaries.len(),
            cap,
        });
    }
    let binary: Vec<bool> = model.columns.iter().map(|c| c.is_binary()).collect();
    let lo: Vec<f64> = model.columns.iter().map(|c| c.lower).collect();
    let hi: Vec<f64> = model.columns.iter().map(|c| c.upper).collect();
    let base = model.to_linear_program();
    let mut search = Search {
        model,
        binaries: &binaries,
        binary: &binary,
        base,
        best: None,
        stats: SolveStats::default(),
    };
    search.dfs(0, lo, hi)?;
    let mut stats = search.stats;
    stats.wall_time = start.elapsed();
    Ok(match search.best {
        Some((objective, values)) => MblpSolution {
            status: MblpStatus::Optimal,
            values,
            objective,
            stats,
        },
        None => MblpSolution {
            status: MblpStatus::Infeasible,
            values: Vec::new(),
            objective: f64::INFINITY,
            stats,
        },
    })
}

struct Search<'a> {
    model: &'a ModelIR,
    binaries: &'a [usize],
    binary: &'a [bool],
    base: crate::lp::LinearProgram,
    best: Option<(f64, Vec<f64>)>,
    stats: SolveStats,
}

impl Search<'_> {
    fn dfs(&mut self, depth: usize, mut lo: Vec<f64>, mut hi: Vec<f64>) -> Result<(), MblpError> {
        self.stats.nodes += 1;
        if !propagate(self.model, self.binary, &mut lo, &mut hi) {
            return Ok(());
        }
        let next = self.binaries[depth..].iter().position(|&j| lo[j] != hi[j]);
        match next {
            None => self.leaf(&lo, &hi),
            Some(off) => {
                let j = self.binaries[depth + off];
                for v in [0.0, 1.0] {
                    let (mut l2, mut h2) = (lo.clone(), hi.clone());
                    l2[j] = v;
                    h2[j] = v;
                    self.dfs(depth + off + 1, l2, h2)?;
                }
                Ok(())
            }
        }
    }

    fn leaf(&mut self, lo: &[f64], hi: &[f64]) -> Result<(), MblpError> {
        let mut lp = self.base.clone();
        let fixings: Vec<(usize, f64)> = self.binaries.iter().map(|&j| (j, lo[j])).collect();
        for &(j, v) in &fixings {
            lp.columns[j].lower = v;
            lp.columns[j].upper = v;
        }
        debug_assert!(self.binaries.iter().all(|&j| lo[j] == hi[j]));
        let out = solve_lp(&lp).map_err(|source| MblpError::Lp { source, fixings })?;
        self.stats.lp_solves += 1;
        self.stats.lp_iterations += out.iterations;
        match out.status {
            LpStatus::Optimal => {
                let obj = self.model.evaluate(&out.values);
                if self.best.as_ref().is_none_or(|(b, _)| obj < b - 1e-9) {
                    self.stats.incumbents.push((self.stats.nodes, obj));
                    self.best = Some((obj, out.values));
                }
                Ok(())
            }
            LpStatus::Infeasible => Ok(()),
            LpStatus::Unbounded => Err(MblpError::Unbounded),
        }
    }
}
