use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Family, FormulationError, RowTag, VarKey, VarKind, Variant};
use crate::lp::{LinearProgram, Relation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub key: VarKey,
    pub lower: f64,
    pub upper: f64,
}

impl ColumnInfo {
    pub fn is_binary(&self) -> bool {
        self.key.kind().is_binary()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub tag: RowTag,
}

/// Identifiers used when rendering row and column names.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NameTable {
    pub nodes: Vec<String>,
    pub services: Vec<String>,
}

/// Solver-agnostic mixed binary linear program, always a minimization.
#[derive(Debug, Clone)]
pub struct ModelIR {
    pub variant: Variant,
    pub path_budget: usize,
    pub columns: Vec<ColumnInfo>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(usize, f64)>,
    pub objective_constant: f64,
    pub names: NameTable,
    index: HashMap<VarKey, usize>,
    products: HashMap<(usize, usize), usize>,
}

impl ModelIR {
    pub fn new(variant: Variant, path_budget: usize, names: NameTable) -> Self {
        ModelIR {
            variant,
            path_budget,
            columns: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            objective_constant: 0.0,
            names,
            index: HashMap::new(),
            products: HashMap::new(),
        }
    }

    pub fn add_column(&mut self, key: VarKey, lower: f64, upper: f64) -> Result<usize, FormulationError> {
        if self.index.contains_key(&key) {
            return Err(FormulationError::DuplicateColumn(self.key_name(&key)));
        }
        let col = self.columns.len();
        self.columns.push(ColumnInfo { key, lower, upper });
        self.index.insert(key, col);
        Ok(col)
    }

    /// Adds a column with bounds implied by its kind.
    pub fn add_binary(&mut self, key: VarKey) -> Result<usize, FormulationError> {
        debug_assert!(key.kind().is_binary());
        self.add_column(key, 0.0, 1.0)
    }

    pub fn add_continuous(&mut self, key: VarKey) -> Result<usize, FormulationError> {
        debug_assert!(!key.kind().is_binary());
        self.add_column(key, 0.0, f64::INFINITY)
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64, tag: RowTag) -> usize {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.columns.len()));
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
            tag,
        });
        self.constraints.len() - 1
    }

    /// Column for `a * b` of two placement indicators of consecutive chain
    /// positions. The auxiliary binary and its three rows are created once
    /// and shared by every later request for the same pair.
    pub fn linearize_product(&mut self, a: &VarKey, b: &VarKey) -> Result<usize, FormulationError> {
        let ca = self
            .column(a)
            .ok_or_else(|| FormulationError::UnknownColumn(self.key_name(a)))?;
        let cb = self
            .column(b)
            .ok_or_else(|| FormulationError::UnknownColumn(self.key_name(b)))?;
        if let Some(&w) = self.products.get(&(ca, cb)) {
            return Ok(w);
        }
        let (k, s, vs, vt) = match (*a, *b) {
            (VarKey::X { k, s, v: vs }, VarKey::X { k: k2, s: s2, v: vt }) if k == k2 && s2 == s + 1 => (k, s, vs, vt),
            _ => {
                return Err(FormulationError::BadProduct(format!(
                    "{} * {} is not a pair of consecutive placements of one flow",
                    self.key_name(a),
                    self.key_name(b)
                )))
            }
        };
        let w = self.add_binary(VarKey::Omega { k, s, vs, vt })?;
        let tag = RowTag::new(Family::Linearization).k(k).s(s).pair(vs, vt);
        self.add_constraint(vec![(w, 1.0), (ca, -1.0)], Relation::Le, 0.0, tag);
        self.add_constraint(vec![(w, 1.0), (cb, -1.0)], Relation::Le, 0.0, tag);
        self.add_constraint(vec![(w, 1.0), (ca, -1.0), (cb, -1.0)], Relation::Ge, -1.0, tag);
        self.products.insert((ca, cb), w);
        Ok(w)
    }

    pub fn column(&self, key: &VarKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn binary_columns(&self) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&j| self.columns[j].is_binary())
            .collect()
    }

    pub fn num_binaries(&self) -> usize {
        self.columns.iter().filter(|c| c.is_binary()).count()
    }

    pub fn count_kind(&self, kind: VarKind) -> usize {
        self.columns.iter().filter(|c| c.key.kind() == kind).count()
    }

    pub fn family_counts(&self) -> BTreeMap<Family, usize> {
        let mut out = BTreeMap::new();
        for c in &self.constraints {
            *out.entry(c.tag.family).or_insert(0) += 1;
        }
        out
    }

    /// Every objective coefficient and the constant are integers.
    pub fn integral_objective(&self) -> bool {
        self.objective_constant.fract() == 0.0
            && self
                .objective
                .iter()
                .all(|&(j, c)| c.fract() == 0.0 && self.columns[j].is_binary())
    }

    /// Continuous relaxation.
    pub fn to_linear_program(&self) -> LinearProgram {
        let mut lp = LinearProgram::default();
        for c in &self.columns {
            lp.add_column(c.lower, c.upper, 0.0);
        }
        for &(j, c) in &self.objective {
            lp.columns[j].cost += c;
        }
        for c in &self.constraints {
            lp.add_row(c.coeffs.clone(), c.relation, c.rhs);
        }
        lp.objective_constant = self.objective_constant;
        lp
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }

    /// Largest violation of bounds, rows or binary integrality.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (c, &v) in self.columns.iter().zip(x) {
            worst = worst.max(c.lower - v).max(v - c.upper);
            if c.is_binary() {
                worst = worst.max(v.min(1.0 - v).max(0.0));
            }
        }
        for r in &self.constraints {
            let lhs: f64 = r.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            worst = worst.max(-r.relation.slack(lhs, r.rhs));
        }
        worst
    }

    fn node(&self, v: usize) -> &str {
        self.names.nodes.get(v).map(String::as_str).unwrap_or("?")
    }

    fn service(&self, k: usize) -> &str {
        self.names.services.get(k).map(String::as_str).unwrap_or("?")
    }

    pub fn column_name(&self, j: usize) -> String {
        self.key_name(&self.columns[j].key)
    }

    pub fn key_name(&self, key: &VarKey) -> String {
        match *key {
            VarKey::X { k, s, v } => format!("X({},{},{})", self.service(k), s, self.node(v)),
            VarKey::Y { v } => format!("Y({})", self.node(v)),
            VarKey::Z { k, s, vs, vt, p, i, j } => format!(
                "Z({},{},{},{},{},{},{})",
                self.service(k),
                s,
                self.node(vs),
                self.node(vt),
                p,
                self.node(i),
                self.node(j)
            ),
            VarKey::RPath { k, s, vs, vt, p } => format!(
                "RP({},{},{},{},{})",
                self.service(k),
                s,
                self.node(vs),
                self.node(vt),
                p
            ),
            VarKey::RLink { k, s, vs, vt, p, i, j } => format!(
                "RL({},{},{},{},{},{},{})",
                self.service(k),
                s,
                self.node(vs),
                self.node(vt),
                p,
                self.node(i),
                self.node(j)
            ),
            VarKey::Theta { k, s } => format!("THETA({},{})", self.service(k), s),
            VarKey::Omega { k, s, vs, vt } => {
                format!("OMEGA({},{},{},{})", self.service(k), s, self.node(vs), self.node(vt))
            }
        }
    }

    /// `<familyTag>[k=..,s=..,vs=..,vt=..,p=..,i=..,j=..]` listing only the
    /// indices the row carries.
    pub fn row_name(&self, r: usize) -> String {
        let tag = &self.constraints[r].tag;
        let mut parts: Vec<String> = Vec::new();
        if let Some(k) = tag.k {
            parts.push(format!("k={}", self.service(k)));
        }
        if let Some(s) = tag.s {
            parts.push(format!("s={s}"));
        }
        if let Some(v) = tag.vs {
            parts.push(format!("vs={}", self.node(v)));
        }
        if let Some(v) = tag.vt {
            parts.push(format!("vt={}", self.node(v)));
        }
        if let Some(p) = tag.p {
            parts.push(format!("p={p}"));
        }
        if let Some(i) = tag.i {
            parts.push(format!("i={}", self.node(i)));
        }
        if let Some(j) = tag.j {
            parts.push(format!("j={}", self.node(j)));
        }
        let mut name = String::from(tag.family.tag());
        let _ = write!(name, "[{}]", parts.join(","));
        name
    }
}
