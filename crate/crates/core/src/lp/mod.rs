//! Linear-programming engine used for every relaxation solved by the
//! branch-and-bound search.
//!
//! Tolerances: primal feasibility and reduced-cost optimality `1e-7`; a
//! pivot smaller than `1e-11` is reported as [`LpError::NumericalBreakdown`].
//! Solves are deterministic: the pivot rule has no randomness and ties are
//! broken by index.

mod factor;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use simplex::{Basis, Simplex, FEAS_TOL, OPT_TOL, PIVOT_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }

    /// Signed slack `rhs - lhs` oriented so that negative means violated.
    pub fn slack(self, lhs: f64, rhs: f64) -> f64 {
        match self {
            Relation::Le => rhs - lhs,
            Relation::Ge => lhs - rhs,
            Relation::Eq => -(lhs - rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpColumn {
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `min c x + c0  s.t.  rows, lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub columns: Vec<LpColumn>,
    pub rows: Vec<LpRow>,
    pub objective_constant: f64,
}

impl LinearProgram {
    pub fn add_column(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.columns.push(LpColumn { lower, upper, cost });
        self.columns.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        self.rows.push(LpRow { coeffs, relation, rhs });
        self.rows.len() - 1
    }

    pub(crate) fn check(&self) -> Result<(), LpError> {
        for (j, c) in self.columns.iter().enumerate() {
            if !c.lower.is_finite() {
                return Err(LpError::InvalidProgram(format!(
                    "column {j} has non-finite lower bound"
                )));
            }
            if c.upper.is_nan() || !c.cost.is_finite() {
                return Err(LpError::InvalidProgram(format!("column {j} has NaN data")));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if !r.rhs.is_finite() {
                return Err(LpError::InvalidProgram(format!("row {i} has non-finite rhs")));
            }
            for &(j, a) in &r.coeffs {
                if j >= self.columns.len() {
                    return Err(LpError::InvalidProgram(format!(
                        "row {i} references missing column {j}"
                    )));
                }
                if !a.is_finite() {
                    return Err(LpError::InvalidProgram(format!("row {i} has a non-finite coefficient")));
                }
            }
        }
        Ok(())
    }

    /// Largest bound or row violation of `x`, zero when feasible.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (c, &v) in self.columns.iter().zip(x) {
            worst = worst.max(c.lower - v).max(v - c.upper);
        }
        for r in &self.rows {
            let lhs: f64 = r.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            worst = worst.max(-r.relation.slack(lhs, r.rhs));
        }
        worst
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.columns.iter().zip(x).map(|(c, v)| c.cost * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Structural column values; empty unless `status` is `Optimal`.
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: u64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LpError {
    #[error("invalid linear program: {0}")]
    InvalidProgram(String),
    #[error("numerical breakdown at iteration {iteration} (pivot {pivot:e})")]
    NumericalBreakdown { pivot: f64, iteration: u64 },
    #[error("iteration limit reached after {0} iterations")]
    IterationLimit(u64),
}

/// Solves `lp` from the all-logical basis.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    Simplex::new(lp)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp1() -> LinearProgram {
        let mut lp = LinearProgram::default();
        let x = lp.add_column(0.0, f64::INFINITY, -1.0);
        lp.add_row(vec![(x, 1.0)], Relation::Le, 3.0);
        lp
    }

    #[test]
    fn single_variable() {
        let out = solve_lp(&lp1()).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.values[0] - 3.0).abs() < 1e-9);
        assert!((out.objective + 3.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_rows() {
        let mut lp = LinearProgram::default();
        let x = lp.add_column(0.0, f64::INFINITY, 0.0);
        lp.add_row(vec![(x, 1.0)], Relation::Ge, 1.0);
        lp.add_row(vec![(x, 1.0)], Relation::Le, 0.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn contradictory_bounds() {
        let mut lp = LinearProgram::default();
        lp.add_column(1.0, 0.0, 0.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::default();
        let x = lp.add_column(0.0, f64::INFINITY, -1.0);
        let y = lp.add_column(0.0, f64::INFINITY, 0.0);
        lp.add_row(vec![(x, 1.0), (y, -1.0)], Relation::Le, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn tighten_upper_bound_warm() {
        let lp = lp1();
        let mut s = Simplex::new(&lp).unwrap();
        s.solve().unwrap();
        let out = s.resolve_with_bound_change(0, 0.0, 1.0).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.values[0] - 1.0).abs() < 1e-9);
        assert!((out.objective + 1.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y  s.t. x + y = 4, x - y >= 1, x <= 3
        let mut lp = LinearProgram::default();
        let x = lp.add_column(0.0, 3.0, 1.0);
        let y = lp.add_column(0.0, f64::INFINITY, 2.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 4.0);
        lp.add_row(vec![(x, 1.0), (y, -1.0)], Relation::Ge, 1.0);
        let out = solve_lp(&lp).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.values[0] - 3.0).abs() < 1e-9);
        assert!((out.values[1] - 1.0).abs() < 1e-9);
        assert!((out.objective - 5.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_dangling_column() {
        let mut lp = LinearProgram::default();
        lp.add_column(0.0, 1.0, 0.0);
        lp.add_row(vec![(3, 1.0)], Relation::Le, 1.0);
        assert!(matches!(solve_lp(&lp), Err(LpError::InvalidProgram(_))));
    }

    #[test]
    fn objective_constant_carried() {
        let mut lp = lp1();
        lp.objective_constant = 10.0;
        assert!((solve_lp(&lp).unwrap().objective - 7.0).abs() < 1e-9);
    }
}
