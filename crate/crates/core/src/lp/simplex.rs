//! Bounded-variable revised primal simplex.
//!
//! Every row `a x (rel) b` becomes `a x + s = b` with a logical `s` whose
//! bounds encode the relation (`<=`: `[0, inf)`, `>=`: `(-inf, 0]`,
//! `=`: `[0, 0]`). The all-logical basis is therefore always available and
//! equality logicals play the role of phase-1 artificials: phase 1 drives
//! the sum of bound violations of basic variables to zero, phase 2
//! minimizes the real cost. A solve may start from any saved basis, which
//! is what branch-and-bound uses after a bound change.

use super::factor::EtaFile;
use super::{LinearProgram, LpError, LpOutcome, LpStatus, Relation};

pub const FEAS_TOL: f64 = 1e-7;
pub const OPT_TOL: f64 = 1e-7;
pub const PIVOT_FLOOR: f64 = 1e-11;
/// Ratio-test candidates below this magnitude are treated as zero.
const PIVOT_ZERO: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;
/// Consecutive degenerate pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(u32),
    AtLower,
    AtUpper,
}

/// Saved basis: slot assignment plus the nonbasic variables resting at
/// their upper bound. Everything else is nonbasic at its lower bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    slots: Vec<u32>,
    at_upper: Vec<u32>,
}

impl Basis {
    pub fn size_bytes(&self) -> usize {
        4 * (self.slots.len() + self.at_upper.len())
    }
}

/// Simplex working state for one LP skeleton. Column bounds may be changed
/// between solves; the basis carries over.
#[derive(Debug, Clone)]
pub struct Simplex {
    m: usize,
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    orig_lower: Vec<f64>,
    orig_upper: Vec<f64>,
    rhs: Vec<f64>,
    constant: f64,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    etas: EtaFile,
    since_refactor: usize,
    total_iterations: u64,
    iteration_limit: u64,
    // scratch
    work: Vec<f64>,
    dual: Vec<f64>,
}

enum Pricing {
    Dantzig,
    Bland,
}

impl Simplex {
    pub fn new(lp: &LinearProgram) -> Result<Self, LpError> {
        lp.check()?;
        let m = lp.rows.len();
        let n = lp.columns.len();
        let mut counts = vec![0usize; n];
        for row in &lp.rows {
            for &(j, _) in &row.coeffs {
                counts[j] += 1;
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + counts[j];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut vals = vec![0.0; nnz];
        let mut fill = col_ptr.clone();
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                row_idx[fill[j]] = i;
                vals[fill[j]] = a;
                fill[j] += 1;
            }
        }

        let mut cost = Vec::with_capacity(n + m);
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for c in &lp.columns {
            cost.push(c.cost);
            lower.push(c.lower);
            upper.push(c.upper);
        }
        for row in &lp.rows {
            cost.push(0.0);
            let (lo, hi) = match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
        }
        let mut state = vec![VarState::AtLower; n + m];
        for (j, s) in state.iter_mut().enumerate().take(n) {
            if !lower[j].is_finite() {
                *s = VarState::AtUpper;
            }
        }
        let basis: Vec<usize> = (n..n + m).collect();
        for (slot, &var) in basis.iter().enumerate() {
            state[var] = VarState::Basic(slot as u32);
        }
        let mut x = vec![0.0; n + m];
        for j in 0..n {
            x[j] = nonbasic_value(state[j], lower[j], upper[j]);
        }
        let iteration_limit = 200 * (n + m) as u64 + 10_000;
        let mut s = Simplex {
            m,
            n,
            col_ptr,
            row_idx,
            vals,
            cost,
            orig_lower: lower.clone(),
            orig_upper: upper.clone(),
            lower,
            upper,
            rhs: lp.rows.iter().map(|r| r.rhs).collect(),
            constant: lp.objective_constant,
            x,
            state,
            basis,
            etas: EtaFile::default(),
            since_refactor: 0,
            total_iterations: 0,
            iteration_limit,
            work: vec![0.0; m],
            dual: vec![0.0; m],
        };
        s.compute_basic_values();
        Ok(s)
    }

    pub fn num_columns(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn total_iterations(&self) -> u64 {
        self.total_iterations
    }

    pub fn column_bounds(&self, col: usize) -> (f64, f64) {
        (self.lower[col], self.upper[col])
    }

    pub fn original_bounds(&self, col: usize) -> (f64, f64) {
        (self.orig_lower[col], self.orig_upper[col])
    }

    /// Changes the bounds of structural column `col` for subsequent solves.
    pub fn set_bounds(&mut self, col: usize, lower: f64, upper: f64) {
        assert!(col < self.n, "column {col} out of range");
        self.lower[col] = lower;
        self.upper[col] = upper;
    }

    pub fn reset_bounds(&mut self, col: usize) {
        self.lower[col] = self.orig_lower[col];
        self.upper[col] = self.orig_upper[col];
    }

    pub fn snapshot(&self) -> Basis {
        let at_upper = self
            .state
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, VarState::AtUpper))
            .map(|(j, _)| j as u32)
            .collect();
        Basis {
            slots: self.basis.iter().map(|&v| v as u32).collect(),
            at_upper,
        }
    }

    /// Loads a basis previously taken from this skeleton and refactorizes.
    pub fn restore(&mut self, basis: &Basis) {
        assert_eq!(basis.slots.len(), self.m, "basis from a different skeleton");
        for s in self.state.iter_mut() {
            *s = VarState::AtLower;
        }
        for &j in &basis.at_upper {
            self.state[j as usize] = VarState::AtUpper;
        }
        for (slot, &v) in basis.slots.iter().enumerate() {
            self.basis[slot] = v as usize;
            self.state[v as usize] = VarState::Basic(slot as u32);
        }
        self.refactor();
    }

    /// Tightens or relaxes one column's bounds and re-optimizes from the
    /// current basis.
    pub fn resolve_with_bound_change(&mut self, col: usize, lower: f64, upper: f64) -> Result<LpOutcome, LpError> {
        self.set_bounds(col, lower, upper);
        self.solve()
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = if j < self.n {
            self.col_ptr[j]..self.col_ptr[j + 1]
        } else {
            0..0
        };
        let logical = if j >= self.n { Some((j - self.n, 1.0)) } else { None };
        range.map(move |p| (self.row_idx[p], self.vals[p])).chain(logical)
    }

    fn col_nnz(&self, j: usize) -> usize {
        if j < self.n {
            self.col_ptr[j + 1] - self.col_ptr[j]
        } else {
            1
        }
    }

    fn snap_nonbasic(&mut self) {
        for j in 0..self.n + self.m {
            match self.state[j] {
                VarState::Basic(_) => {}
                VarState::AtUpper if !self.upper[j].is_finite() => {
                    self.state[j] = VarState::AtLower;
                    self.x[j] = self.lower[j];
                }
                VarState::AtLower if !self.lower[j].is_finite() => {
                    self.state[j] = VarState::AtUpper;
                    self.x[j] = self.upper[j];
                }
                s => self.x[j] = nonbasic_value(s, self.lower[j], self.upper[j]),
            }
        }
    }

    /// Reinversion order. Rows of the structural block with a single
    /// column fix that column's pivot and cause no fill, so they go first,
    /// repeatedly; the remaining columns follow by ascending length.
    fn pivot_order(&self, structurals: &[usize], covered: &[usize]) -> Vec<(usize, Option<usize>)> {
        let m = self.m;
        let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for &q in structurals {
            for p in self.col_ptr[q]..self.col_ptr[q + 1] {
                let i = self.row_idx[p];
                if covered[i] == usize::MAX {
                    row_cols[i].push(q);
                }
            }
        }
        let mut count: Vec<usize> = row_cols.iter().map(Vec::len).collect();
        let mut done = vec![false; self.n];
        let mut stack: Vec<usize> = (0..m).rev().filter(|&i| count[i] == 1).collect();
        let mut order = Vec::with_capacity(structurals.len());
        while let Some(r) = stack.pop() {
            if count[r] != 1 {
                continue;
            }
            let Some(&q) = row_cols[r].iter().find(|&&q| !done[q]) else {
                continue;
            };
            done[q] = true;
            count[r] = 0;
            order.push((q, Some(r)));
            for p in self.col_ptr[q]..self.col_ptr[q + 1] {
                let i = self.row_idx[p];
                if covered[i] == usize::MAX && count[i] > 0 {
                    count[i] -= 1;
                    if count[i] == 1 {
                        stack.push(i);
                    }
                }
            }
        }
        let mut rest: Vec<usize> = structurals.iter().copied().filter(|&q| !done[q]).collect();
        rest.sort_by_key(|&j| (self.col_nnz(j), j));
        order.extend(rest.into_iter().map(|q| (q, None)));
        order
    }

    /// Rebuilds the eta file from scratch for the current basic set. Columns
    /// that turn out dependent are swapped for row logicals.
    fn refactor(&mut self) {
        self.etas.clear();
        self.since_refactor = 0;
        let m = self.m;
        let n = self.n;
        let mut new_basis = vec![usize::MAX; m];
        let mut structurals = Vec::new();
        for &v in &self.basis {
            if v >= n {
                new_basis[v - n] = v;
            } else {
                structurals.push(v);
            }
        }
        let order = self.pivot_order(&structurals, &new_basis);
        let mut work = std::mem::take(&mut self.work);
        let mut mark = vec![false; m];
        let mut touched: Vec<usize> = Vec::new();
        for (q, preferred) in order {
            for &i in &touched {
                work[i] = 0.0;
                mark[i] = false;
            }
            touched.clear();
            for (i, a) in self.column(q) {
                work[i] = a;
                mark[i] = true;
                touched.push(i);
            }
            self.etas.ftran_sparse(&mut work, &mut touched, &mut mark);
            let mut best = usize::MAX;
            let mut best_abs = 0.0;
            if let Some(r) = preferred {
                if new_basis[r] == usize::MAX && work[r].abs() >= 0.01 {
                    best = r;
                    best_abs = work[r].abs();
                }
            }
            if best == usize::MAX {
                for &i in &touched {
                    let w = work[i].abs();
                    if new_basis[i] == usize::MAX && (w > best_abs || (w == best_abs && i < best)) {
                        best_abs = w;
                        best = i;
                    }
                }
            }
            if best_abs < PIVOT_ZERO {
                // Dependent column: drop it to a bound; a logical takes over.
                self.state[q] = if self.lower[q].is_finite() {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                };
                continue;
            }
            self.etas.push_sparse(&work, &touched, best);
            new_basis[best] = q;
        }
        for &i in &touched {
            work[i] = 0.0;
        }
        self.work = work;
        for (slot, v) in new_basis.iter_mut().enumerate() {
            if *v == usize::MAX {
                *v = n + slot;
            }
        }
        for j in 0..n + m {
            if let VarState::Basic(_) = self.state[j] {
                self.state[j] = if self.lower[j].is_finite() {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                };
            }
        }
        for (slot, &v) in new_basis.iter().enumerate() {
            self.state[v] = VarState::Basic(slot as u32);
        }
        self.basis = new_basis;
        self.snap_nonbasic();
        self.compute_basic_values();
    }

    fn compute_basic_values(&mut self) {
        let mut w = self.rhs.clone();
        for j in 0..self.n + self.m {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            if j < self.n {
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    w[self.row_idx[p]] -= self.vals[p] * xj;
                }
            } else {
                w[j - self.n] -= xj;
            }
        }
        self.etas.ftran(&mut w);
        for (slot, &v) in self.basis.iter().enumerate() {
            self.x[v] = w[slot];
        }
    }

    fn infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&v| {
                let x = self.x[v];
                if x < self.lower[v] - FEAS_TOL {
                    self.lower[v] - x
                } else if x > self.upper[v] + FEAS_TOL {
                    x - self.upper[v]
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn objective(&self) -> f64 {
        self.constant + (0..self.n).map(|j| self.cost[j] * self.x[j]).sum::<f64>()
    }

    /// Optimizes from the current basis under the current bounds.
    pub fn solve(&mut self) -> Result<LpOutcome, LpError> {
        if (0..self.n).any(|j| self.lower[j] > self.upper[j] + FEAS_TOL) {
            return Ok(self.outcome(LpStatus::Infeasible, self.total_iterations));
        }
        self.snap_nonbasic();
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        } else {
            self.compute_basic_values();
        }
        let start_iterations = self.total_iterations;
        let mut degenerate_run = 0usize;
        let mut verify_rounds = 0usize;
        let mut verified = false;
        let mut phase1_cost = vec![0.0; self.m];
        let mut alpha = vec![0.0; self.m];

        loop {
            if self.total_iterations - start_iterations > self.iteration_limit {
                return Err(LpError::IterationLimit(self.total_iterations - start_iterations));
            }
            // Phase selection from the current basic values.
            let mut phase_one = false;
            for (slot, &v) in self.basis.iter().enumerate() {
                let x = self.x[v];
                phase1_cost[slot] = if x < self.lower[v] - FEAS_TOL {
                    phase_one = true;
                    -1.0
                } else if x > self.upper[v] + FEAS_TOL {
                    phase_one = true;
                    1.0
                } else {
                    0.0
                };
            }
            // Duals y^T = c_B^T B^-1.
            for (slot, &v) in self.basis.iter().enumerate() {
                self.dual[slot] = if phase_one { phase1_cost[slot] } else { self.cost[v] };
            }
            let mut dual = std::mem::take(&mut self.dual);
            self.etas.btran(&mut dual);
            self.dual = dual;

            let rule = if degenerate_run >= STALL_LIMIT {
                Pricing::Bland
            } else {
                Pricing::Dantzig
            };
            let entering = self.price(phase_one, &rule);
            let Some((q, dq)) = entering else {
                if phase_one {
                    if self.since_refactor > 0 {
                        self.refactor();
                        continue;
                    }
                    return Ok(self.outcome(LpStatus::Infeasible, start_iterations));
                }
                if !verified {
                    // Recompute basic values from scratch and price again.
                    verify_rounds += 1;
                    if verify_rounds > 5 {
                        return Err(LpError::NumericalBreakdown {
                            pivot: f64::NAN,
                            iteration: self.total_iterations,
                        });
                    }
                    if verify_rounds > 2 && self.since_refactor > 0 {
                        self.refactor();
                    } else {
                        self.compute_basic_values();
                    }
                    verified = true;
                    continue;
                }
                return Ok(self.outcome(LpStatus::Optimal, start_iterations));
            };

            // Entering moves up when its reduced cost is negative.
            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            alpha.iter_mut().for_each(|a| *a = 0.0);
            for (i, a) in self.column(q) {
                alpha[i] = a;
            }
            self.etas.ftran(&mut alpha);

            let step = self.ratio_test(&alpha, dir, phase_one, &rule);
            let range = self.upper[q] - self.lower[q];
            self.total_iterations += 1;

            match step {
                None if !range.is_finite() => {
                    if phase_one {
                        return Err(LpError::NumericalBreakdown {
                            pivot: 0.0,
                            iteration: self.total_iterations,
                        });
                    }
                    return Ok(self.outcome(LpStatus::Unbounded, start_iterations));
                }
                Some((_, t, _)) if t >= range => {
                    self.bound_flip(q, dir, range, &alpha);
                    verified = false;
                }
                None => {
                    self.bound_flip(q, dir, range, &alpha);
                    verified = false;
                }
                Some((slot, t, leave_at_upper)) => {
                    let pivot = alpha[slot];
                    if pivot.abs() < PIVOT_FLOOR {
                        return Err(LpError::NumericalBreakdown {
                            pivot,
                            iteration: self.total_iterations,
                        });
                    }
                    if t * dq.abs() < 1e-12 {
                        degenerate_run += 1;
                    } else {
                        degenerate_run = 0;
                    }
                    self.pivot(q, dir, t, slot, leave_at_upper, &alpha);
                    verified = false;
                    if self.since_refactor >= REFACTOR_EVERY {
                        self.refactor();
                    }
                }
            }
        }
    }

    fn price(&self, phase_one: bool, rule: &Pricing) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            let st = self.state[j];
            if matches!(st, VarState::Basic(_)) || self.upper[j] <= self.lower[j] {
                continue;
            }
            let cj = if phase_one { 0.0 } else { self.cost[j] };
            let d = if j < self.n {
                let mut acc = cj;
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    acc -= self.dual[self.row_idx[p]] * self.vals[p];
                }
                acc
            } else {
                cj - self.dual[j - self.n]
            };
            let attractive = match st {
                VarState::AtLower => d < -OPT_TOL,
                VarState::AtUpper => d > OPT_TOL,
                VarState::Basic(_) => false,
            };
            if !attractive {
                continue;
            }
            match rule {
                Pricing::Bland => return Some((j, d)),
                Pricing::Dantzig => {
                    if d.abs() > best_score {
                        best_score = d.abs();
                        best = Some((j, d));
                    }
                }
            }
        }
        best
    }

    /// Returns `(slot, step, leaves_at_upper)` for the blocking basic
    /// variable, or `None` when no basic variable blocks.
    fn ratio_test(&self, alpha: &[f64], dir: f64, phase_one: bool, rule: &Pricing) -> Option<(usize, f64, bool)> {
        // (slot, exact ratio, relaxed ratio, leaves at upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (slot, &a) in alpha.iter().enumerate() {
            if a.abs() < PIVOT_ZERO {
                continue;
            }
            let v = self.basis[slot];
            let delta = -dir * a;
            let x = self.x[v];
            let (lo, hi) = (self.lower[v], self.upper[v]);
            if phase_one && x < lo - FEAS_TOL {
                if delta > 0.0 {
                    let r = (lo - x) / delta;
                    cands.push((slot, r, r, false));
                }
            } else if phase_one && x > hi + FEAS_TOL {
                if delta < 0.0 {
                    let r = (x - hi) / -delta;
                    cands.push((slot, r, r, true));
                }
            } else if delta < 0.0 {
                if lo.is_finite() {
                    cands.push((slot, (x - lo) / -delta, (x - lo + FEAS_TOL) / -delta, false));
                }
            } else if hi.is_finite() {
                cands.push((slot, (hi - x) / delta, (hi - x + FEAS_TOL) / delta, true));
            }
        }
        if cands.is_empty() {
            return None;
        }
        let chosen = match rule {
            Pricing::Bland => {
                let min = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
                cands
                    .iter()
                    .filter(|c| c.1 <= min + 1e-12)
                    .min_by_key(|c| self.basis[c.0])
                    .copied()
            }
            Pricing::Dantzig => {
                let theta = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
                cands
                    .iter()
                    .filter(|c| c.1 <= theta)
                    .max_by(|a, b| alpha[a.0].abs().total_cmp(&alpha[b.0].abs()).then(b.0.cmp(&a.0)))
                    .copied()
            }
        }?;
        Some((chosen.0, chosen.1.max(0.0), chosen.3))
    }

    fn bound_flip(&mut self, q: usize, dir: f64, range: f64, alpha: &[f64]) {
        let t = range;
        for (slot, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                self.x[self.basis[slot]] -= dir * t * a;
            }
        }
        if dir > 0.0 {
            self.state[q] = VarState::AtUpper;
            self.x[q] = self.upper[q];
        } else {
            self.state[q] = VarState::AtLower;
            self.x[q] = self.lower[q];
        }
    }

    fn pivot(&mut self, q: usize, dir: f64, t: f64, slot: usize, leave_at_upper: bool, alpha: &[f64]) {
        if t != 0.0 {
            for (s, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    self.x[self.basis[s]] -= dir * t * a;
                }
            }
        }
        let leaving = self.basis[slot];
        let enter_value = self.x[q] + dir * t;
        if leave_at_upper {
            self.state[leaving] = VarState::AtUpper;
            self.x[leaving] = self.upper[leaving];
        } else {
            self.state[leaving] = VarState::AtLower;
            self.x[leaving] = self.lower[leaving];
        }
        self.basis[slot] = q;
        self.state[q] = VarState::Basic(slot as u32);
        self.x[q] = enter_value;
        self.etas.push(alpha, slot);
        self.since_refactor += 1;
    }

    fn outcome(&self, status: LpStatus, start: u64) -> LpOutcome {
        let iterations = self.total_iterations - start;
        match status {
            LpStatus::Optimal => LpOutcome {
                status,
                values: self.x[..self.n].to_vec(),
                objective: self.objective(),
                iterations,
            },
            LpStatus::Infeasible => LpOutcome {
                status,
                values: Vec::new(),
                objective: f64::INFINITY,
                iterations,
            },
            LpStatus::Unbounded => LpOutcome {
                status,
                values: Vec::new(),
                objective: f64::NEG_INFINITY,
                iterations,
            },
        }
    }

    /// Sum of bound violations of the current basic solution.
    pub fn primal_infeasibility(&self) -> f64 {
        self.infeasibility()
    }

    pub fn eta_nnz(&self) -> usize {
        self.etas.nnz()
    }

    pub fn eta_count(&self) -> usize {
        self.etas.len()
    }
}

fn nonbasic_value(state: VarState, lower: f64, upper: f64) -> f64 {
    match state {
        VarState::AtUpper => upper,
        _ => lower,
    }
}
