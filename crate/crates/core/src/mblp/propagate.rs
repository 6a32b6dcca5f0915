//! Activity-based bound tightening over the model rows.
//!
//! Each row `lo <= a x <= hi` bounds every term by what the other terms can
//! contribute at most or at least. Binary columns are fixed once the
//! tightened bound excludes one of their values by more than the
//! verification tolerance; continuous bounds are tightened internally and
//! only serve to propagate further. A row whose activity range misses its
//! bounds by more than the tolerance proves the node infeasible.

use crate::formulation::ModelIR;
use crate::lp::Relation;

const TOL: f64 = 1e-6;
/// Continuous bound changes smaller than this are not propagated further.
const MIN_CHANGE: f64 = 1e-6;

struct Row {
    terms: Vec<(usize, f64)>,
    lo: f64,
    hi: f64,
}

pub(crate) struct Propagator {
    rows: Vec<Row>,
    col_rows: Vec<Vec<usize>>,
    binary: Vec<bool>,
    /// Cap on row visits per call, as a multiple of the row count.
    budget_factor: usize,
}

#[derive(Clone, Copy, Default)]
struct Activity {
    min: f64,
    min_inf: u32,
    max: f64,
    max_inf: u32,
}

impl Propagator {
    pub fn new(model: &ModelIR) -> Self {
        let n = model.num_columns();
        let mut col_rows = vec![Vec::new(); n];
        let rows: Vec<Row> = model
            .constraints
            .iter()
            .enumerate()
            .map(|(r, c)| {
                for &(j, _) in &c.coeffs {
                    col_rows[j].push(r);
                }
                let (lo, hi) = match c.relation {
                    Relation::Le => (f64::NEG_INFINITY, c.rhs),
                    Relation::Ge => (c.rhs, f64::INFINITY),
                    Relation::Eq => (c.rhs, c.rhs),
                };
                Row {
                    terms: c.coeffs.iter().copied().filter(|&(_, a)| a != 0.0).collect(),
                    lo,
                    hi,
                }
            })
            .collect();
        Propagator {
            rows,
            col_rows,
            binary: model.columns.iter().map(|c| c.is_binary()).collect(),
            budget_factor: 20,
        }
    }

    fn activity(&self, r: usize, lb: &[f64], ub: &[f64]) -> Activity {
        let mut a = Activity::default();
        for &(j, c) in &self.rows[r].terms {
            let (mn, mx) = if c > 0.0 { (lb[j], ub[j]) } else { (ub[j], lb[j]) };
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

    /// Propagates from the rows touching `changed` (every row when `None`).
    /// Returns `false` when some row cannot be satisfied.
    pub fn run(&self, lb: &mut [f64], ub: &mut [f64], changed: Option<&[usize]>) -> bool {
        let nrows = self.rows.len();
        let mut queued = vec![false; nrows];
        let mut queue: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
        match changed {
            None => {
                queue.extend(0..nrows);
                queued.iter_mut().for_each(|q| *q = true);
            }
            Some(cols) => {
                for &j in cols {
                    for &r in &self.col_rows[j] {
                        if !queued[r] {
                            queued[r] = true;
                            queue.push_back(r);
                        }
                    }
                }
            }
        }
        let mut visits = 0usize;
        let limit = self.budget_factor * nrows.max(1);
        while let Some(r) = queue.pop_front() {
            queued[r] = false;
            visits += 1;
            if visits > limit {
                break;
            }
            let row = &self.rows[r];
            let act = self.activity(r, lb, ub);
            if act.min_inf == 0 && act.min > row.hi + TOL {
                return false;
            }
            if act.max_inf == 0 && act.max < row.lo - TOL {
                return false;
            }
            for &(j, c) in &row.terms {
                let (l, u) = (lb[j], ub[j]);
                if l == u {
                    continue;
                }
                let (mut new_l, mut new_u) = (l, u);
                // Upper row bound: c x_j <= hi - (min activity of the rest).
                if row.hi.is_finite() {
                    let own = if c > 0.0 { l } else { u };
                    let rest = rest_of(act.min, act.min_inf, c, own);
                    if let Some(rest) = rest {
                        let bound = (row.hi - rest) / c;
                        if c > 0.0 {
                            new_u = new_u.min(bound);
                        } else {
                            new_l = new_l.max(bound);
                        }
                    }
                }
                // Lower row bound: c x_j >= lo - (max activity of the rest).
                if row.lo.is_finite() {
                    let own = if c > 0.0 { u } else { l };
                    let rest = rest_of(act.max, act.max_inf, c, own);
                    if let Some(rest) = rest {
                        let bound = (row.lo - rest) / c;
                        if c > 0.0 {
                            new_l = new_l.max(bound);
                        } else {
                            new_u = new_u.min(bound);
                        }
                    }
                }
                let mut changed = false;
                if self.binary[j] {
                    // Fix only when the excluded value misses the row by
                    // more than the tolerance.
                    if u == 1.0 && (1.0 - new_u) * c.abs() > TOL {
                        ub[j] = 0.0;
                        changed = true;
                    }
                    if l == 0.0 && new_l * c.abs() > TOL {
                        lb[j] = 1.0;
                        changed = true;
                    }
                    if lb[j] > ub[j] {
                        return false;
                    }
                } else {
                    if new_u.is_finite() && (u.is_infinite() || new_u < u - MIN_CHANGE * u.abs().max(1.0)) {
                        ub[j] = new_u + TOL / c.abs().max(1.0);
                        changed = true;
                    }
                    if new_l.is_finite() && (l.is_infinite() || new_l > l + MIN_CHANGE * l.abs().max(1.0)) {
                        lb[j] = new_l - TOL / c.abs().max(1.0);
                        changed = true;
                    }
                    if lb[j] > ub[j] + TOL {
                        return false;
                    }
                }
                if changed {
                    for &r2 in &self.col_rows[j] {
                        if !queued[r2] {
                            queued[r2] = true;
                            queue.push_back(r2);
                        }
                    }
                }
            }
        }
        true
    }
}

/// Activity of a row without term `c * own`, or `None` when unbounded.
fn rest_of(total: f64, inf_count: u32, c: f64, own: f64) -> Option<f64> {
    if own.is_finite() {
        (inf_count == 0).then_some(total - c * own)
    } else {
        (inf_count == 1).then_some(total)
    }
}
