//! Problem-instance data model: the network, its cloud nodes and the
//! service requests that must be chained through them.
//!
//! Everything here is plain data. Instances are immutable once built and
//! are shared freely between solver workers.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A directed link with its capacity (rate units) and delay (time units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub tail: String,
    pub head: String,
    pub capacity: f64,
    pub delay: f64,
}

/// A function a cloud node can host, with its processing delay there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostedFunction {
    pub id: String,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudNode {
    pub node: String,
    pub capacity: f64,
    pub functions: Vec<HostedFunction>,
}

impl CloudNode {
    pub fn supports(&self, function: &str) -> bool {
        self.functions.iter().any(|f| f.id == function)
    }

    pub fn nfv_delay(&self, function: &str) -> Option<f64> {
        self.functions.iter().find(|f| f.id == function).map(|f| f.delay)
    }
}

/// Directed graph with a subset of compute-capable nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub nodes: Vec<String>,
    pub links: Vec<Link>,
    pub cloud_nodes: Vec<CloudNode>,
}

/// One flow that must traverse `chain` in order on its way from
/// `source` to `destination`.
///
/// `rates[s]` is the rate after the `s`-th function, so `rates[0]` is the
/// rate leaving the source and the list has one more entry than the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceRequest {
    pub id: String,
    pub source: String,
    pub destination: String,
    pub chain: Vec<String>,
    pub rates: Vec<f64>,
    pub latency_threshold: f64,
}

impl ServiceRequest {
    pub fn chain_len(&self) -> usize {
        self.chain.len()
    }
}

/// Complete problem input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub nodes: Vec<String>,
    pub links: Vec<Link>,
    pub cloud_nodes: Vec<CloudNode>,
    pub services: Vec<ServiceRequest>,
    pub path_budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed instance document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("network has no links")]
    EmptyNetwork,
}

impl Instance {
    pub fn new(network: Network, services: Vec<ServiceRequest>, path_budget: usize) -> Self {
        Instance {
            nodes: network.nodes,
            links: network.links,
            cloud_nodes: network.cloud_nodes,
            services,
            path_budget,
            seed: None,
        }
    }

    pub fn network(&self) -> Network {
        Network {
            nodes: self.nodes.clone(),
            links: self.links.clone(),
            cloud_nodes: self.cloud_nodes.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization is infallible")
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == id)
    }

    pub fn cloud(&self, id: &str) -> Option<&CloudNode> {
        self.cloud_nodes.iter().find(|c| c.node == id)
    }

    pub fn is_cloud(&self, id: &str) -> bool {
        self.cloud(id).is_some()
    }

    pub fn service_index(&self, id: &str) -> Option<usize> {
        self.services.iter().position(|s| s.id == id)
    }

    pub fn link(&self, tail: &str, head: &str) -> Option<&Link> {
        self.links.iter().find(|l| l.tail == tail && l.head == head)
    }
}

/// Machine-readable code for a failed instance invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticCode {
    EmptyNodeSet,
    DuplicateNode,
    InvalidIdentifier,
    UnknownNode,
    SelfLoop,
    DuplicateLink,
    NegativeOrNonFinite,
    DuplicateCloudNode,
    DuplicateFunction,
    DuplicateService,
    SourceIsCloud,
    DestinationIsCloud,
    SourceEqualsDestination,
    EmptyChain,
    RateCountMismatch,
    NonPositiveThreshold,
    UnsatisfiableFunction,
    InvalidPathBudget,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::EmptyNodeSet => "empty_node_set",
            DiagnosticCode::DuplicateNode => "duplicate_node",
            DiagnosticCode::InvalidIdentifier => "invalid_identifier",
            DiagnosticCode::UnknownNode => "unknown_node",
            DiagnosticCode::SelfLoop => "self_loop",
            DiagnosticCode::DuplicateLink => "duplicate_link",
            DiagnosticCode::NegativeOrNonFinite => "negative_or_non_finite",
            DiagnosticCode::DuplicateCloudNode => "duplicate_cloud_node",
            DiagnosticCode::DuplicateFunction => "duplicate_function",
            DiagnosticCode::DuplicateService => "duplicate_service",
            DiagnosticCode::SourceIsCloud => "source_is_cloud",
            DiagnosticCode::DestinationIsCloud => "destination_is_cloud",
            DiagnosticCode::SourceEqualsDestination => "source_equals_destination",
            DiagnosticCode::EmptyChain => "empty_chain",
            DiagnosticCode::RateCountMismatch => "rate_count_mismatch",
            DiagnosticCode::NonPositiveThreshold => "non_positive_threshold",
            DiagnosticCode::UnsatisfiableFunction => "unsatisfiable_function",
            DiagnosticCode::InvalidPathBudget => "invalid_path_budget",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    /// Dotted path into the instance document, e.g. `services[1].source`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code.as_str(), self.location, self.message)
    }
}

/// Identifiers end up inside LP row and column names, so they are kept to
/// a conservative character set.
fn valid_identifier(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn bad_number(x: f64) -> bool {
    !x.is_finite() || x < 0.0
}

/// Checks every instance invariant and returns one diagnostic per violation.
/// An empty list means the instance is well-formed.
pub fn validate_instance(inst: &Instance) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |code, location: String, message: String| {
        out.push(Diagnostic {
            code,
            location,
            message,
        })
    };

    if inst.nodes.is_empty() {
        push(
            DiagnosticCode::EmptyNodeSet,
            "nodes".into(),
            "network has no nodes".into(),
        );
    }
    let mut seen = BTreeSet::new();
    for (i, n) in inst.nodes.iter().enumerate() {
        if !seen.insert(n.as_str()) {
            push(
                DiagnosticCode::DuplicateNode,
                format!("nodes[{i}]"),
                format!("node '{n}' listed twice"),
            );
        }
        if !valid_identifier(n) {
            push(
                DiagnosticCode::InvalidIdentifier,
                format!("nodes[{i}]"),
                format!("node id '{n}' must be non-empty [A-Za-z0-9_.-]"),
            );
        }
    }
    let known = |id: &str| seen.contains(id);

    let mut arcs = BTreeSet::new();
    for (e, l) in inst.links.iter().enumerate() {
        for (field, id) in [("tail", &l.tail), ("head", &l.head)] {
            if !known(id) {
                push(
                    DiagnosticCode::UnknownNode,
                    format!("links[{e}].{field}"),
                    format!("unknown node '{id}'"),
                );
            }
        }
        if l.tail == l.head {
            push(
                DiagnosticCode::SelfLoop,
                format!("links[{e}]"),
                format!("self-loop on '{}'", l.tail),
            );
        }
        if !arcs.insert((l.tail.as_str(), l.head.as_str())) {
            push(
                DiagnosticCode::DuplicateLink,
                format!("links[{e}]"),
                format!("link ({},{}) listed twice", l.tail, l.head),
            );
        }
        if bad_number(l.capacity) {
            push(
                DiagnosticCode::NegativeOrNonFinite,
                format!("links[{e}].capacity"),
                format!("capacity {} must be finite and >= 0", l.capacity),
            );
        }
        if bad_number(l.delay) {
            push(
                DiagnosticCode::NegativeOrNonFinite,
                format!("links[{e}].delay"),
                format!("delay {} must be finite and >= 0", l.delay),
            );
        }
    }

    let mut clouds = BTreeSet::new();
    for (c, cloud) in inst.cloud_nodes.iter().enumerate() {
        if !known(&cloud.node) {
            push(
                DiagnosticCode::UnknownNode,
                format!("cloud_nodes[{c}].node"),
                format!("unknown node '{}'", cloud.node),
            );
        }
        if !clouds.insert(cloud.node.as_str()) {
            push(
                DiagnosticCode::DuplicateCloudNode,
                format!("cloud_nodes[{c}]"),
                format!("cloud node '{}' listed twice", cloud.node),
            );
        }
        if bad_number(cloud.capacity) {
            push(
                DiagnosticCode::NegativeOrNonFinite,
                format!("cloud_nodes[{c}].capacity"),
                format!("capacity {} must be finite and >= 0", cloud.capacity),
            );
        }
        let mut fns = BTreeSet::new();
        for (f, func) in cloud.functions.iter().enumerate() {
            if !fns.insert(func.id.as_str()) {
                push(
                    DiagnosticCode::DuplicateFunction,
                    format!("cloud_nodes[{c}].functions[{f}]"),
                    format!("function '{}' listed twice", func.id),
                );
            }
            if !valid_identifier(&func.id) {
                push(
                    DiagnosticCode::InvalidIdentifier,
                    format!("cloud_nodes[{c}].functions[{f}].id"),
                    format!("function id '{}' must be non-empty [A-Za-z0-9_.-]", func.id),
                );
            }
            if bad_number(func.delay) {
                push(
                    DiagnosticCode::NegativeOrNonFinite,
                    format!("cloud_nodes[{c}].functions[{f}].delay"),
                    format!("delay {} must be finite and >= 0", func.delay),
                );
            }
        }
    }

    let mut service_ids = BTreeSet::new();
    for (k, svc) in inst.services.iter().enumerate() {
        let at = |field: &str| format!("services[{k}].{field}");
        if !service_ids.insert(svc.id.as_str()) {
            push(
                DiagnosticCode::DuplicateService,
                at("id"),
                format!("service id '{}' listed twice", svc.id),
            );
        }
        if !valid_identifier(&svc.id) {
            push(
                DiagnosticCode::InvalidIdentifier,
                at("id"),
                format!("service id '{}' must be non-empty [A-Za-z0-9_.-]", svc.id),
            );
        }
        for (field, id) in [("source", &svc.source), ("destination", &svc.destination)] {
            if !known(id) {
                push(DiagnosticCode::UnknownNode, at(field), format!("unknown node '{id}'"));
            }
        }
        if clouds.contains(svc.source.as_str()) {
            push(
                DiagnosticCode::SourceIsCloud,
                at("source"),
                format!("source '{}' is a cloud node", svc.source),
            );
        }
        if clouds.contains(svc.destination.as_str()) {
            push(
                DiagnosticCode::DestinationIsCloud,
                at("destination"),
                format!("destination '{}' is a cloud node", svc.destination),
            );
        }
        if svc.source == svc.destination {
            push(
                DiagnosticCode::SourceEqualsDestination,
                at("destination"),
                "source and destination coincide".into(),
            );
        }
        if svc.chain.is_empty() {
            push(
                DiagnosticCode::EmptyChain,
                at("chain"),
                "chain must contain at least one function".into(),
            );
        }
        if svc.rates.len() != svc.chain.len() + 1 {
            push(
                DiagnosticCode::RateCountMismatch,
                at("rates"),
                format!(
                    "expected {} rates for a chain of length {}, got {}",
                    svc.chain.len() + 1,
                    svc.chain.len(),
                    svc.rates.len()
                ),
            );
        }
        for (s, r) in svc.rates.iter().enumerate() {
            if bad_number(*r) {
                push(
                    DiagnosticCode::NegativeOrNonFinite,
                    format!("services[{k}].rates[{s}]"),
                    format!("rate {r} must be finite and >= 0"),
                );
            }
        }
        if !svc.latency_threshold.is_finite() || svc.latency_threshold <= 0.0 {
            push(
                DiagnosticCode::NonPositiveThreshold,
                at("latency_threshold"),
                format!("threshold {} must be finite and > 0", svc.latency_threshold),
            );
        }
        for (s, f) in svc.chain.iter().enumerate() {
            if !inst.cloud_nodes.iter().any(|c| c.supports(f)) {
                push(
                    DiagnosticCode::UnsatisfiableFunction,
                    format!("services[{k}].chain[{s}]"),
                    format!("no cloud node supports function '{f}'"),
                );
            }
        }
    }

    if inst.path_budget < 1 {
        push(
            DiagnosticCode::InvalidPathBudget,
            "path_budget".into(),
            "path budget must be at least 1".into(),
        );
    }
    out
}

/// All-pairs shortest-path distances and their mean over reachable pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStats {
    /// Mean distance over ordered pairs `(i, j)`, `i != j`, with a finite
    /// distance. Zero when no such pair exists.
    pub mean: f64,
    /// Distance for every ordered pair of distinct nodes; `f64::INFINITY`
    /// when `j` is unreachable from `i`.
    pub dist: BTreeMap<(String, String), f64>,
}

impl PathStats {
    pub fn distance(&self, from: &str, to: &str) -> f64 {
        self.dist
            .get(&(from.to_string(), to.to_string()))
            .copied()
            .unwrap_or(f64::INFINITY)
    }
}

/// Floyd-Warshall over an index-based weighted arc list.
pub fn all_pairs_shortest(n: usize, arcs: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(i, j, w) in arcs {
        if w < d[i][j] {
            d[i][j] = w;
        }
    }
    for m in 0..n {
        for i in 0..n {
            let dim = d[i][m];
            if !dim.is_finite() {
                continue;
            }
            for j in 0..n {
                let cand = dim + d[m][j];
                if cand < d[i][j] {
                    d[i][j] = cand;
                }
            }
        }
    }
    d
}

/// Mean over finite off-diagonal entries of a distance matrix.
pub fn mean_finite_distance(d: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, row) in d.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            if i != j && x.is_finite() {
                sum += x;
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Shortest-path statistics using link delays as weights.
pub fn shortest_path_stats(net: &Network) -> Result<PathStats, ModelError> {
    if net.links.is_empty() {
        return Err(ModelError::EmptyNetwork);
    }
    let index: HashMap<&str, usize> = net.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let arcs: Vec<(usize, usize, f64)> = net
        .links
        .iter()
        .filter_map(|l| Some((*index.get(l.tail.as_str())?, *index.get(l.head.as_str())?, l.delay)))
        .collect();
    let d = all_pairs_shortest(net.nodes.len(), &arcs);
    let mut dist = BTreeMap::new();
    for (i, a) in net.nodes.iter().enumerate() {
        for (j, b) in net.nodes.iter().enumerate() {
            if i != j {
                dist.insert((a.clone(), b.clone()), d[i][j]);
            }
        }
    }
    Ok(PathStats {
        mean: mean_finite_distance(&d),
        dist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instancegen::fig1_instance;

    fn two_node(delay: f64) -> Network {
        Network {
            nodes: vec!["A".into(), "B".into()],
            links: vec![Link {
                tail: "A".into(),
                head: "B".into(),
                capacity: 1.0,
                delay,
            }],
            cloud_nodes: vec![],
        }
    }

    #[test]
    fn fig1_is_clean() {
        assert!(validate_instance(&fig1_instance()).is_empty());
    }

    #[test]
    fn source_in_cloud_set_is_flagged() {
        let mut inst = fig1_instance();
        inst.services[0].source = "C".into();
        let diags = validate_instance(&inst);
        assert_eq!(diags.len(), 1, "{diags:?}");
        assert_eq!(diags[0].code, DiagnosticCode::SourceIsCloud);
        assert_eq!(diags[0].location, "services[0].source");
    }

    #[test]
    fn unsupported_function_is_flagged() {
        let mut inst = fig1_instance();
        inst.services[1].chain = vec!["f9".into()];
        let diags = validate_instance(&inst);
        assert_eq!(diags.len(), 1, "{diags:?}");
        assert_eq!(diags[0].code, DiagnosticCode::UnsatisfiableFunction);
    }

    #[test]
    fn structural_violations() {
        let mut inst = fig1_instance();
        inst.links.push(inst.links[0].clone());
        inst.links.push(Link {
            tail: "A".into(),
            head: "A".into(),
            capacity: -1.0,
            delay: f64::NAN,
        });
        inst.services[0].rates.push(1.0);
        inst.path_budget = 0;
        let codes: Vec<_> = validate_instance(&inst).iter().map(|d| d.code).collect();
        for code in [
            DiagnosticCode::DuplicateLink,
            DiagnosticCode::SelfLoop,
            DiagnosticCode::NegativeOrNonFinite,
            DiagnosticCode::RateCountMismatch,
            DiagnosticCode::InvalidPathBudget,
        ] {
            assert!(codes.contains(&code), "missing {code:?} in {codes:?}");
        }
    }

    #[test]
    fn one_pair_mean() {
        let stats = shortest_path_stats(&two_node(5.0)).unwrap();
        assert_eq!(stats.mean, 5.0);
        assert_eq!(stats.distance("A", "B"), 5.0);
        assert!(stats.distance("B", "A").is_infinite());
    }

    #[test]
    fn empty_network_errors() {
        let mut net = two_node(1.0);
        net.links.clear();
        assert!(matches!(shortest_path_stats(&net), Err(ModelError::EmptyNetwork)));
    }

    #[test]
    fn fig1_distances() {
        // Values from enumerating every simple path of the drawn digraph.
        let stats = shortest_path_stats(&fig1_instance().network()).unwrap();
        assert_eq!(stats.distance("A", "D"), 3.0);
        assert_eq!(stats.distance("A", "E"), 2.0);
        assert_eq!(stats.distance("E", "B"), 2.0);
        assert_eq!(stats.distance("C", "B"), 1.0);
        assert!(stats.distance("D", "A").is_infinite());
    }
}
