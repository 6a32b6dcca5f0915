//! Mixed binary linear model of joint function placement, multi-path
//! routing and latency-bounded resource allocation.
//!
//! A flow with chain length `l` has positions `0..=l+1`: position `0` is the
//! source, `l+1` the destination and `1..=l` the cloud nodes hosting each
//! function. Segment `s` carries rate `rates[s]` from position `s` to
//! position `s+1` over at most `P` paths. Products of two placement
//! indicators are linearized with one shared auxiliary binary per
//! `(flow, segment, tail, head)`; endpoint positions have the constant
//! placement factor 1, so segments `0` and `l` need no auxiliary column.

mod model;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::Relation;
use crate::net_model::{validate_instance, Diagnostic, DiagnosticCode, Instance};

pub use model::{ColumnInfo, Constraint, ModelIR, NameTable};

/// Which formulation to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Multi-path routing with end-to-end latency rows.
    Full,
    /// One path per segment, per-link rates substituted by `rate * z`.
    SinglePath,
    /// Multi-path routing without any delay rows.
    NoLatency,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::SinglePath, Variant::NoLatency];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::SinglePath => "single-path",
            Variant::NoLatency => "no-latency",
        }
    }

    pub fn has_latency(self) -> bool {
        !matches!(self, Variant::NoLatency)
    }

    pub fn has_rate_columns(self) -> bool {
        !matches!(self, Variant::SinglePath)
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Variant::Full),
            "single-path" | "single_path" | "p1" => Ok(Variant::SinglePath),
            "no-latency" | "no_latency" => Ok(Variant::NoLatency),
            other => Err(format!("unknown variant '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarKind {
    XPlace,
    YActivate,
    ZPathLink,
    RPathRate,
    RLinkRateOnPath,
    ThetaSegDelay,
    OmegaPairPlace,
}

impl VarKind {
    pub fn is_binary(self) -> bool {
        matches!(
            self,
            VarKind::XPlace | VarKind::YActivate | VarKind::ZPathLink | VarKind::OmegaPairPlace
        )
    }
}

/// Column identity. Node fields are indices into `Instance::nodes`, `k` is
/// the service index, `s` the segment or chain position, `p` the 1-based
/// path slot and `(i, j)` a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarKey {
    X {
        k: usize,
        s: usize,
        v: usize,
    },
    Y {
        v: usize,
    },
    Z {
        k: usize,
        s: usize,
        vs: usize,
        vt: usize,
        p: usize,
        i: usize,
        j: usize,
    },
    RPath {
        k: usize,
        s: usize,
        vs: usize,
        vt: usize,
        p: usize,
    },
    RLink {
        k: usize,
        s: usize,
        vs: usize,
        vt: usize,
        p: usize,
        i: usize,
        j: usize,
    },
    Theta {
        k: usize,
        s: usize,
    },
    Omega {
        k: usize,
        s: usize,
        vs: usize,
        vt: usize,
    },
}

impl VarKey {
    pub fn kind(&self) -> VarKind {
        match self {
            VarKey::X { .. } => VarKind::XPlace,
            VarKey::Y { .. } => VarKind::YActivate,
            VarKey::Z { .. } => VarKind::ZPathLink,
            VarKey::RPath { .. } => VarKind::RPathRate,
            VarKey::RLink { .. } => VarKind::RLinkRateOnPath,
            VarKey::Theta { .. } => VarKind::ThetaSegDelay,
            VarKey::Omega { .. } => VarKind::OmegaPairPlace,
        }
    }
}

/// Constraint family; every row carries exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    OneFunctionPerNode,
    ExactlyOneNode,
    NodeCapacity,
    Activation,
    SegmentRate,
    PathLinkCoupling,
    RateLinkCoupling,
    LinkCapacity,
    RateConservation,
    PathConservation,
    PathOutDegree,
    SegmentDelay,
    E2eLatency,
    Linearization,
    RateOrdering,
}

impl Family {
    pub const ALL: [Family; 15] = [
        Family::OneFunctionPerNode,
        Family::ExactlyOneNode,
        Family::NodeCapacity,
        Family::Activation,
        Family::SegmentRate,
        Family::PathLinkCoupling,
        Family::RateLinkCoupling,
        Family::LinkCapacity,
        Family::RateConservation,
        Family::PathConservation,
        Family::PathOutDegree,
        Family::SegmentDelay,
        Family::E2eLatency,
        Family::Linearization,
        Family::RateOrdering,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Family::OneFunctionPerNode => "one_function_per_node",
            Family::ExactlyOneNode => "exactly_one_node",
            Family::NodeCapacity => "node_capacity",
            Family::Activation => "activation",
            Family::SegmentRate => "segment_rate",
            Family::PathLinkCoupling => "path_link_coupling",
            Family::RateLinkCoupling => "rate_link_coupling",
            Family::LinkCapacity => "link_capacity",
            Family::RateConservation => "rate_conservation",
            Family::PathConservation => "path_conservation",
            Family::PathOutDegree => "path_out_degree",
            Family::SegmentDelay => "segment_delay",
            Family::E2eLatency => "e2e_latency",
            Family::Linearization => "linearization",
            Family::RateOrdering => "rate_ordering",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.tag() == tag)
    }
}

/// Row provenance: family plus whichever indices identify the row.
/// Single-node families (capacity, activation, one-function-per-node) put
/// their cloud node in `vs`; conservation rows put their node in `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowTag {
    pub family: Family,
    pub k: Option<usize>,
    pub s: Option<usize>,
    pub vs: Option<usize>,
    pub vt: Option<usize>,
    pub p: Option<usize>,
    pub i: Option<usize>,
    pub j: Option<usize>,
}

impl RowTag {
    pub fn new(family: Family) -> Self {
        RowTag {
            family,
            k: None,
            s: None,
            vs: None,
            vt: None,
            p: None,
            i: None,
            j: None,
        }
    }
    pub fn k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }
    pub fn s(mut self, s: usize) -> Self {
        self.s = Some(s);
        self
    }
    pub fn pair(mut self, vs: usize, vt: usize) -> Self {
        self.vs = Some(vs);
        self.vt = Some(vt);
        self
    }
    pub fn node(mut self, v: usize) -> Self {
        self.vs = Some(v);
        self
    }
    pub fn p(mut self, p: usize) -> Self {
        self.p = Some(p);
        self
    }
    pub fn at(mut self, i: usize) -> Self {
        self.i = Some(i);
        self
    }
    pub fn link(mut self, i: usize, j: usize) -> Self {
        self.i = Some(i);
        self.j = Some(j);
        self
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FormulationError {
    #[error("instance is invalid: {}", join(.0))]
    InvalidInstance(Vec<Diagnostic>),
    #[error("function without a candidate cloud node: {}", join(.0))]
    UnsatisfiableFunction(Vec<Diagnostic>),
    #[error("column {0} is not in the catalog")]
    UnknownColumn(String),
    #[error("column {0} is already in the catalog")]
    DuplicateColumn(String),
    #[error("cannot linearize: {0}")]
    BadProduct(String),
}

fn join(d: &[Diagnostic]) -> String {
    d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub variant: Variant,
    /// Overrides the instance's path budget (ignored for single-path).
    pub path_budget: Option<usize>,
    /// Adds `r(p) >= r(p+1)` rows between interchangeable path slots.
    pub rate_ordering: bool,
    /// Lets each path slot leave a node on at most one link, so that its
    /// rate follows a single route. Without these rows the rate of one slot
    /// may branch wherever its link set branches.
    pub simple_paths: bool,
}

impl BuildOptions {
    pub fn new(variant: Variant) -> Self {
        BuildOptions {
            variant,
            path_budget: None,
            rate_ordering: false,
            simple_paths: true,
        }
    }
}

pub fn build_full(inst: &Instance) -> Result<ModelIR, FormulationError> {
    build(inst, &BuildOptions::new(Variant::Full))
}

pub fn build_single_path(inst: &Instance) -> Result<ModelIR, FormulationError> {
    build(inst, &BuildOptions::new(Variant::SinglePath))
}

pub fn build_no_latency(inst: &Instance) -> Result<ModelIR, FormulationError> {
    build(inst, &BuildOptions::new(Variant::NoLatency))
}

pub fn build_variant(inst: &Instance, variant: Variant) -> Result<ModelIR, FormulationError> {
    build(inst, &BuildOptions::new(variant))
}

/// Tail or head of a segment: a fixed endpoint or a placement column.
#[derive(Clone, Copy)]
struct Position {
    node: usize,
    x: Option<usize>,
}

/// Placement product of one segment pair: a single column (an endpoint
/// factor is the constant 1) or the auxiliary product column.
struct SegmentPair {
    vs: usize,
    vt: usize,
    product: usize,
}

pub fn build(inst: &Instance, opts: &BuildOptions) -> Result<ModelIR, FormulationError> {
    let diags = validate_instance(inst);
    if !diags.is_empty() {
        let (unsat, other): (Vec<_>, Vec<_>) = diags
            .into_iter()
            .partition(|d| d.code == DiagnosticCode::UnsatisfiableFunction);
        return Err(if other.is_empty() {
            FormulationError::UnsatisfiableFunction(unsat)
        } else {
            let mut all = other;
            all.extend(unsat);
            FormulationError::InvalidInstance(all)
        });
    }

    let variant = opts.variant;
    let paths = match variant {
        Variant::SinglePath => 1,
        _ => opts.path_budget.unwrap_or(inst.path_budget).max(1),
    };
    let node_idx: HashMap<&str, usize> = inst.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let links: Vec<(usize, usize, f64, f64)> = inst
        .links
        .iter()
        .map(|l| {
            (
                node_idx[l.tail.as_str()],
                node_idx[l.head.as_str()],
                l.capacity,
                l.delay,
            )
        })
        .collect();
    let n_nodes = inst.nodes.len();

    let mut model = ModelIR::new(
        variant,
        paths,
        NameTable {
            nodes: inst.nodes.clone(),
            services: inst.services.iter().map(|s| s.id.clone()).collect(),
        },
    );

    let mut y_col = HashMap::new();
    for c in &inst.cloud_nodes {
        let v = node_idx[c.node.as_str()];
        let col = model.add_binary(VarKey::Y { v })?;
        model.objective.push((col, 1.0));
        y_col.insert(v, col);
    }

    // Per cloud node: (column, rate) of every placement, for capacity rows.
    let mut node_load: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_nodes];
    // Per link: capacity-row terms.
    let mut link_load: Vec<Vec<(usize, f64)>> = vec![Vec::new(); links.len()];

    for (k, svc) in inst.services.iter().enumerate() {
        let len = svc.chain.len();
        let src = node_idx[svc.source.as_str()];
        let dst = node_idx[svc.destination.as_str()];

        // positions[s] for s in 0..=len+1
        let mut positions: Vec<Vec<Position>> = Vec::with_capacity(len + 2);
        positions.push(vec![Position { node: src, x: None }]);
        for (pos, f) in svc.chain.iter().enumerate() {
            let s = pos + 1;
            let mut cands = Vec::new();
            for c in inst.cloud_nodes.iter().filter(|c| c.supports(f)) {
                let v = node_idx[c.node.as_str()];
                let col = model.add_binary(VarKey::X { k, s, v })?;
                cands.push(Position { node: v, x: Some(col) });
                node_load[v].push((col, svc.rates[s]));
            }
            positions.push(cands);
        }
        positions.push(vec![Position { node: dst, x: None }]);

        // Placement rows.
        for s in 1..=len {
            let row: Vec<(usize, f64)> = positions[s].iter().map(|p| (p.x.unwrap(), 1.0)).collect();
            model.add_constraint(row, Relation::Eq, 1.0, RowTag::new(Family::ExactlyOneNode).k(k).s(s));
        }
        let mut per_node: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for s in 1..=len {
            for p in &positions[s] {
                per_node[p.node].push(p.x.unwrap());
            }
        }
        for c in &inst.cloud_nodes {
            let v = node_idx[c.node.as_str()];
            if per_node[v].len() >= 2 {
                let row = per_node[v].iter().map(|&col| (col, 1.0)).collect();
                model.add_constraint(
                    row,
                    Relation::Le,
                    1.0,
                    RowTag::new(Family::OneFunctionPerNode).k(k).node(v),
                );
            }
        }
        for s in 1..=len {
            for p in &positions[s] {
                let x = p.x.unwrap();
                model.add_constraint(
                    vec![(x, 1.0), (y_col[&p.node], -1.0)],
                    Relation::Le,
                    0.0,
                    RowTag::new(Family::Activation).k(k).s(s).node(p.node),
                );
            }
        }

        let mut theta_cols = Vec::new();
        for s in 0..=len {
            let rate = svc.rates[s];
            let mut pairs = Vec::new();
            for tail in &positions[s] {
                for head in &positions[s + 1] {
                    if tail.node == head.node {
                        continue;
                    }
                    let product = match (tail.x, head.x) {
                        (Some(a), Some(b)) => {
                            let ka = model.columns[a].key;
                            let kb = model.columns[b].key;
                            model.linearize_product(&ka, &kb)?
                        }
                        (Some(a), None) => a,
                        (None, Some(b)) => b,
                        (None, None) => unreachable!("chains have at least one function"),
                    };
                    pairs.push(SegmentPair {
                        vs: tail.node,
                        vt: head.node,
                        product,
                    });
                }
            }

            // z columns per (pair, p) kept for the delay rows.
            let mut delay_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); paths];
            for pair in &pairs {
                let (vs, vt) = (pair.vs, pair.vt);
                let mut path_rates = Vec::new();
                for p in 1..=paths {
                    let rp = if variant.has_rate_columns() {
                        Some(model.add_continuous(VarKey::RPath { k, s, vs, vt, p })?)
                    } else {
                        None
                    };
                    let mut z_cols = Vec::with_capacity(links.len());
                    let mut r_cols = Vec::with_capacity(links.len());
                    for (e, &(i, j, _, delay)) in links.iter().enumerate() {
                        let z = model.add_binary(VarKey::Z { k, s, vs, vt, p, i, j })?;
                        z_cols.push(z);
                        delay_terms[p - 1].push((z, -delay));
                        model.add_constraint(
                            vec![(z, 1.0), (pair.product, -1.0)],
                            Relation::Le,
                            0.0,
                            RowTag::new(Family::PathLinkCoupling)
                                .k(k)
                                .s(s)
                                .pair(vs, vt)
                                .p(p)
                                .link(i, j),
                        );
                        if variant.has_rate_columns() {
                            let r = model.add_continuous(VarKey::RLink { k, s, vs, vt, p, i, j })?;
                            r_cols.push(r);
                            model.add_constraint(
                                vec![(r, 1.0), (z, -rate)],
                                Relation::Le,
                                0.0,
                                RowTag::new(Family::RateLinkCoupling)
                                    .k(k)
                                    .s(s)
                                    .pair(vs, vt)
                                    .p(p)
                                    .link(i, j),
                            );
                            link_load[e].push((r, 1.0));
                        } else {
                            link_load[e].push((z, rate));
                        }
                    }

                    if opts.simple_paths {
                        for node in 0..n_nodes {
                            let mut row: Vec<(usize, f64)> = links
                                .iter()
                                .enumerate()
                                .filter(|(_, l)| l.0 == node)
                                .map(|(e, _)| (z_cols[e], 1.0))
                                .collect();
                            if row.len() >= 2 {
                                row.push((pair.product, -1.0));
                                model.add_constraint(
                                    row,
                                    Relation::Le,
                                    0.0,
                                    RowTag::new(Family::PathOutDegree).k(k).s(s).pair(vs, vt).p(p).at(node),
                                );
                            }
                        }
                    }
                    for node in 0..n_nodes {
                        let mut zrow = Vec::new();
                        let mut rrow = Vec::new();
                        for (e, &(i, j, _, _)) in links.iter().enumerate() {
                            if j == node {
                                zrow.push((z_cols[e], 1.0));
                                if let Some(&r) = r_cols.get(e) {
                                    rrow.push((r, 1.0));
                                }
                            } else if i == node {
                                zrow.push((z_cols[e], -1.0));
                                if let Some(&r) = r_cols.get(e) {
                                    rrow.push((r, -1.0));
                                }
                            }
                        }
                        // in - out = -product at the tail, +product at the head.
                        if node == vs {
                            zrow.push((pair.product, 1.0));
                            if let Some(rp) = rp {
                                rrow.push((rp, 1.0));
                            }
                        } else if node == vt {
                            zrow.push((pair.product, -1.0));
                            if let Some(rp) = rp {
                                rrow.push((rp, -1.0));
                            }
                        }
                        if rp.is_some() && !rrow.is_empty() {
                            model.add_constraint(
                                rrow,
                                Relation::Eq,
                                0.0,
                                RowTag::new(Family::RateConservation)
                                    .k(k)
                                    .s(s)
                                    .pair(vs, vt)
                                    .p(p)
                                    .at(node),
                            );
                        }
                        if !zrow.is_empty() {
                            model.add_constraint(
                                zrow,
                                Relation::Eq,
                                0.0,
                                RowTag::new(Family::PathConservation)
                                    .k(k)
                                    .s(s)
                                    .pair(vs, vt)
                                    .p(p)
                                    .at(node),
                            );
                        }
                    }
                    if let Some(rp) = rp {
                        path_rates.push(rp);
                    }
                }
                if variant.has_rate_columns() {
                    let mut row: Vec<(usize, f64)> = path_rates.iter().map(|&c| (c, 1.0)).collect();
                    row.push((pair.product, -rate));
                    model.add_constraint(
                        row,
                        Relation::Eq,
                        0.0,
                        RowTag::new(Family::SegmentRate).k(k).s(s).pair(vs, vt),
                    );
                    if opts.rate_ordering {
                        for (p, w) in path_rates.windows(2).enumerate() {
                            model.add_constraint(
                                vec![(w[0], 1.0), (w[1], -1.0)],
                                Relation::Ge,
                                0.0,
                                RowTag::new(Family::RateOrdering).k(k).s(s).pair(vs, vt).p(p + 1),
                            );
                        }
                    }
                }
            }

            if variant.has_latency() {
                let theta = model.add_continuous(VarKey::Theta { k, s })?;
                theta_cols.push(theta);
                for (p, terms) in delay_terms.into_iter().enumerate() {
                    let mut row = vec![(theta, 1.0)];
                    row.extend(terms.into_iter().filter(|&(_, d)| d != 0.0));
                    model.add_constraint(
                        row,
                        Relation::Ge,
                        0.0,
                        RowTag::new(Family::SegmentDelay).k(k).s(s).p(p + 1),
                    );
                }
            }
        }

        if variant.has_latency() {
            let mut row: Vec<(usize, f64)> = theta_cols.iter().map(|&c| (c, 1.0)).collect();
            for (pos, f) in svc.chain.iter().enumerate() {
                for p in &positions[pos + 1] {
                    let delay = inst
                        .cloud(&inst.nodes[p.node])
                        .and_then(|c| c.nfv_delay(f))
                        .unwrap_or(0.0);
                    if delay != 0.0 {
                        row.push((p.x.unwrap(), delay));
                    }
                }
            }
            model.add_constraint(
                row,
                Relation::Le,
                svc.latency_threshold,
                RowTag::new(Family::E2eLatency).k(k),
            );
        }
    }

    for c in &inst.cloud_nodes {
        let v = node_idx[c.node.as_str()];
        if !node_load[v].is_empty() {
            let row = std::mem::take(&mut node_load[v]);
            model.add_constraint(row, Relation::Le, c.capacity, RowTag::new(Family::NodeCapacity).node(v));
        }
    }
    for (e, &(i, j, cap, _)) in links.iter().enumerate() {
        if !link_load[e].is_empty() {
            let row = std::mem::take(&mut link_load[e]);
            model.add_constraint(row, Relation::Le, cap, RowTag::new(Family::LinkCapacity).link(i, j));
        }
    }
    Ok(model)
}
