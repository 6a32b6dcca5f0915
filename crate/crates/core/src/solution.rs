//! Decoding of solver output into a slice plan, and an independent
//! validator that re-derives every quantity from the plan and the instance.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{ModelIR, VarKey, Variant};
use crate::mblp::MblpSolution;
use crate::net_model::Instance;

/// Values below this are treated as zero when reading solver output.
const VALUE_TOL: f64 = 1e-7;

/// Routes (link indices, rate) per service, segment and path slot.
type SlotRoutes = Vec<Vec<Vec<(Vec<usize>, f64)>>>;

/// Tolerance of every validator comparison.
pub const CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Chain position, `1..=l`.
    pub position: usize,
    pub function: String,
    pub node: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedPath {
    /// Visited nodes, tail first.
    pub nodes: Vec<String>,
    pub rate: f64,
    /// Sum of link delays along the path.
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub index: usize,
    pub from: String,
    pub to: String,
    /// Required rate of the segment.
    pub rate: f64,
    pub paths: Vec<RoutedPath>,
    /// Largest delay among the used paths.
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub communication: f64,
    pub nfv: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServicePlan {
    pub id: String,
    pub placements: Vec<Placement>,
    pub segments: Vec<Segment>,
    pub delay: DelayReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerParams {
    pub beta1: f64,
    pub beta2: f64,
    pub delta: f64,
}

impl Default for PowerParams {
    fn default() -> Self {
        PowerParams {
            beta1: 10.0,
            beta2: 1.0,
            delta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub params: PowerParams,
    pub activated: usize,
    pub cloud_nodes: usize,
    /// `beta2 * |V| + delta * total processed rate`.
    pub constant: f64,
    pub total: f64,
}

impl PowerReport {
    pub fn compute(inst: &Instance, activated: usize, params: PowerParams) -> Self {
        let processed: f64 = inst
            .services
            .iter()
            .map(|s| s.rates.iter().skip(1).take(s.chain.len()).sum::<f64>())
            .sum();
        let cloud_nodes = inst.cloud_nodes.len();
        let constant = params.beta2 * cloud_nodes as f64 + params.delta * processed;
        PowerReport {
            params,
            activated,
            cloud_nodes,
            constant,
            total: (params.beta1 - params.beta2) * activated as f64 + constant,
        }
    }
}

/// Human-readable solution: placements, routed paths and delays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicePlan {
    pub variant: Variant,
    pub path_budget: usize,
    pub services: Vec<ServicePlan>,
    pub activated: Vec<String>,
    pub power: PowerReport,
    /// Notes about pruned cycles or dropped rate fragments.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SlicePlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn service(&self, id: &str) -> Option<&ServicePlan> {
        self.services.iter().find(|s| s.id == id)
    }

    /// Recomputes every delay and the power report from the paths,
    /// placements and instance data. Used after hand edits.
    pub fn refresh(&mut self, inst: &Instance) {
        let delays = link_delays(inst);
        for (svc, req) in self.services.iter_mut().zip(&inst.services) {
            let mut comm = 0.0;
            for seg in &mut svc.segments {
                for p in &mut seg.paths {
                    p.delay = walk_delay(&p.nodes, &delays).unwrap_or(f64::INFINITY);
                }
                seg.delay = seg.paths.iter().map(|p| p.delay).fold(0.0, f64::max);
                comm += seg.delay;
            }
            let nfv = nfv_delay(inst, req, &svc.placements);
            svc.delay = DelayReport {
                communication: comm,
                nfv,
                total: comm + nfv,
            };
        }
        self.power = PowerReport::compute(inst, self.activated.len(), self.power.params);
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("solution has no assignment to decode (status {0})")]
    NoSolution(&'static str),
    #[error("incoherent solution for service {service} segment {segment}: {reason}")]
    DecodeIncoherent {
        service: String,
        segment: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("unknown service '{0}'")]
    UnknownService(String),
}

fn link_delays(inst: &Instance) -> BTreeMap<(&str, &str), f64> {
    inst.links
        .iter()
        .map(|l| ((l.tail.as_str(), l.head.as_str()), l.delay))
        .collect()
}

fn walk_delay(nodes: &[String], delays: &BTreeMap<(&str, &str), f64>) -> Option<f64> {
    nodes
        .windows(2)
        .map(|w| delays.get(&(w[0].as_str(), w[1].as_str())).copied())
        .sum()
}

fn nfv_delay(inst: &Instance, req: &crate::net_model::ServiceRequest, placements: &[Placement]) -> f64 {
    placements
        .iter()
        .map(|p| {
            inst.cloud(&p.node)
                .and_then(|c| c.nfv_delay(&req.chain[p.position - 1]))
                .unwrap_or(0.0)
        })
        .sum()
}

/// Decodes the assignment of `sol` (built from `inst`) into a plan with the
/// default power parameters.
pub fn decode(model: &ModelIR, sol: &MblpSolution, inst: &Instance) -> Result<SlicePlan, DecodeError> {
    decode_with(model, sol, inst, PowerParams::default())
}

pub fn decode_with(
    model: &ModelIR,
    sol: &MblpSolution,
    inst: &Instance,
    power: PowerParams,
) -> Result<SlicePlan, DecodeError> {
    if !sol.has_solution() {
        return Err(DecodeError::NoSolution(sol.status.as_str()));
    }
    let val = |key: VarKey| sol.value(model, &key).unwrap_or(0.0);
    let node_idx: BTreeMap<&str, usize> = inst.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let arcs: Vec<(usize, usize, f64)> = inst
        .links
        .iter()
        .map(|l| (node_idx[l.tail.as_str()], node_idx[l.head.as_str()], l.delay))
        .collect();
    let mut warnings = Vec::new();
    let mut services = Vec::with_capacity(inst.services.len());
    // Routes found per service, segment and path slot.
    let mut routed: Vec<SlotRoutes> = Vec::with_capacity(inst.services.len());

    for (k, req) in inst.services.iter().enumerate() {
        let incoherent = |segment: usize, reason: String| DecodeError::DecodeIncoherent {
            service: req.id.clone(),
            segment,
            reason,
        };
        let len = req.chain.len();
        let mut positions = Vec::with_capacity(len + 2);
        positions.push(node_idx[req.source.as_str()]);
        let mut placements = Vec::with_capacity(len);
        for (pos, f) in req.chain.iter().enumerate() {
            let s = pos + 1;
            let chosen: Vec<usize> = inst
                .cloud_nodes
                .iter()
                .map(|c| node_idx[c.node.as_str()])
                .filter(|&v| val(VarKey::X { k, s, v }) > 0.5)
                .collect();
            let [v] = chosen[..] else {
                return Err(incoherent(s, format!("{} placements for position {s}", chosen.len())));
            };
            positions.push(v);
            placements.push(Placement {
                position: s,
                function: f.clone(),
                node: inst.nodes[v].clone(),
            });
        }
        positions.push(node_idx[req.destination.as_str()]);

        let mut segments = Vec::with_capacity(len + 1);
        let mut service_routes = Vec::with_capacity(len + 1);
        for s in 0..=len {
            let (vs, vt) = (positions[s], positions[s + 1]);
            let rate = req.rates[s];
            let mut slots = Vec::with_capacity(model.path_budget);
            for p in 1..=model.path_budget {
                let z: Vec<bool> = arcs
                    .iter()
                    .map(|&(i, j, _)| val(VarKey::Z { k, s, vs, vt, p, i, j }) > 0.5)
                    .collect();
                let Some(walk) = find_walk(&arcs, &z, vs, vt) else {
                    return Err(incoherent(s, format!("z arcs of path {p} do not reach the head")));
                };
                let stray = z.iter().filter(|&&b| b).count() - (walk.len() - 1);
                if stray > 0 {
                    warnings.push(format!(
                        "service {} segment {s} path {p}: pruned {stray} z arc(s) off the walk",
                        req.id
                    ));
                }
                let found: Vec<(Vec<usize>, f64)> = if model.variant.has_rate_columns() {
                    let mut r: Vec<f64> = arcs
                        .iter()
                        .map(|&(i, j, _)| val(VarKey::RLink { k, s, vs, vt, p, i, j }))
                        .collect();
                    for (e, &on) in z.iter().enumerate() {
                        if !on && r[e] > VALUE_TOL {
                            return Err(incoherent(s, format!("rate on an unused link in path {p}")));
                        }
                    }
                    let total = val(VarKey::RPath { k, s, vs, vt, p });
                    let parts = decompose(&arcs, &mut r, vs, vt);
                    let got: f64 = parts.iter().map(|x| x.1).sum();
                    if (got - total).abs() > CHECK_TOL {
                        return Err(incoherent(
                            s,
                            format!("path {p} carries {got} but its rate column is {total}"),
                        ));
                    }
                    if r.iter().any(|&x| x > VALUE_TOL) {
                        warnings.push(format!(
                            "service {} segment {s} path {p}: dropped circulating rate",
                            req.id
                        ));
                    }
                    parts
                } else if p == 1 {
                    vec![(walk, rate)]
                } else {
                    Vec::new()
                };
                slots.push(found.into_iter().filter(|x| x.1 > VALUE_TOL).collect::<Vec<_>>());
            }
            service_routes.push(slots);
            segments.push(Segment {
                index: s,
                from: inst.nodes[vs].clone(),
                to: inst.nodes[vt].clone(),
                rate,
                paths: Vec::new(),
                delay: 0.0,
            });
        }
        routed.push(service_routes);
        services.push(ServicePlan {
            id: req.id.clone(),
            placements,
            segments,
            delay: DelayReport {
                communication: 0.0,
                nfv: 0.0,
                total: 0.0,
            },
        });
    }

    consolidate_slots(inst, &arcs, &mut routed, &mut warnings);
    for (svc, service_routes) in services.iter_mut().zip(&routed) {
        for (seg, slots) in svc.segments.iter_mut().zip(service_routes) {
            for (nodes, r) in slots.iter().flatten() {
                let names: Vec<String> = nodes.iter().map(|&v| inst.nodes[v].clone()).collect();
                match seg.paths.iter_mut().find(|q| q.nodes == names) {
                    Some(q) => q.rate += r,
                    None => seg.paths.push(RoutedPath {
                        nodes: names,
                        rate: *r,
                        delay: 0.0,
                    }),
                }
            }
        }
    }

    let activated: Vec<String> = inst
        .cloud_nodes
        .iter()
        .filter(|c| {
            val(VarKey::Y {
                v: node_idx[c.node.as_str()],
            }) > 0.5
        })
        .map(|c| c.node.clone())
        .collect();
    let mut plan = SlicePlan {
        variant: model.variant,
        path_budget: model.path_budget,
        services,
        power: PowerReport::compute(inst, activated.len(), power),
        activated,
        warnings,
    };
    plan.refresh(inst);
    Ok(plan)
}

/// Simple path from `from` to `to` over the selected arcs, first arc in
/// link order at every step.
fn find_walk(arcs: &[(usize, usize, f64)], on: &[bool], from: usize, to: usize) -> Option<Vec<usize>> {
    let mut path = vec![from];
    let mut visited = vec![from];
    fn dfs(
        arcs: &[(usize, usize, f64)],
        on: &[bool],
        to: usize,
        path: &mut Vec<usize>,
        visited: &mut Vec<usize>,
    ) -> bool {
        let here = *path.last().unwrap();
        if here == to {
            return true;
        }
        for (e, &(i, j, _)) in arcs.iter().enumerate() {
            if on[e] && i == here && !visited.contains(&j) {
                visited.push(j);
                path.push(j);
                if dfs(arcs, on, to, path, visited) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    dfs(arcs, on, to, &mut path, &mut visited).then_some(path)
}

/// The rate of one path slot may spread over several routes inside the
/// slot's link set. Each such slot is moved onto a single one of its routes
/// when link capacities allow, so that a segment uses at most as many
/// routes as it has slots. Slots that cannot be merged are left split.
fn consolidate_slots(
    inst: &Instance,
    arcs: &[(usize, usize, f64)],
    routed: &mut [SlotRoutes],
    warnings: &mut Vec<String>,
) {
    let arc_of: BTreeMap<(usize, usize), usize> = arcs.iter().enumerate().map(|(e, a)| ((a.0, a.1), e)).collect();
    let route_arcs = |nodes: &[usize]| -> Vec<usize> { nodes.windows(2).map(|w| arc_of[&(w[0], w[1])]).collect() };
    let mut load = vec![0.0; arcs.len()];
    for (nodes, r) in routed.iter().flatten().flatten().flatten() {
        for e in route_arcs(nodes) {
            load[e] += r;
        }
    }
    for (k, service_routes) in routed.iter_mut().enumerate() {
        for (s, slots) in service_routes.iter_mut().enumerate() {
            for (p, parts) in slots.iter_mut().enumerate() {
                if parts.len() < 2 {
                    continue;
                }
                let total: f64 = parts.iter().map(|x| x.1).sum();
                let mut trial = load.clone();
                for (nodes, r) in parts.iter() {
                    for e in route_arcs(nodes) {
                        trial[e] -= r;
                    }
                }
                let mut order: Vec<usize> = (0..parts.len()).collect();
                order.sort_by(|&a, &b| parts[b].1.total_cmp(&parts[a].1).then(a.cmp(&b)));
                let fits = order.into_iter().find(|&c| {
                    route_arcs(&parts[c].0)
                        .into_iter()
                        .all(|e| trial[e] + total <= inst.links[e].capacity + VALUE_TOL)
                });
                let id = &inst.services[k].id;
                match fits {
                    Some(c) => {
                        let nodes = parts[c].0.clone();
                        for e in route_arcs(&nodes) {
                            trial[e] += total;
                        }
                        load = trial;
                        *parts = vec![(nodes, total)];
                        warnings.push(format!(
                            "service {id} segment {s} path {}: merged split rate onto one route",
                            p + 1
                        ));
                    }
                    None => warnings.push(format!(
                        "service {id} segment {s} path {}: rate stays split over {} routes",
                        p + 1,
                        parts.len()
                    )),
                }
            }
        }
    }
}

/// Splits a rate flow into simple paths from `from` to `to`, consuming the
/// arc rates. Every cycle is cancelled first so that the remaining flow is
/// acyclic; whatever cannot be routed stays in `r`.
fn decompose(arcs: &[(usize, usize, f64)], r: &mut [f64], from: usize, to: usize) -> Vec<(Vec<usize>, f64)> {
    while let Some(cycle) = find_cycle(arcs, r) {
        let m = cycle.iter().map(|&c| r[c]).fold(f64::INFINITY, f64::min);
        for c in cycle {
            r[c] -= m;
        }
    }
    let mut out = Vec::new();
    'outer: for _ in 0..4 * arcs.len() + 4 {
        let mut nodes = vec![from];
        let mut used: Vec<usize> = Vec::new();
        loop {
            let here = *nodes.last().unwrap();
            if here == to {
                break;
            }
            let next = arcs
                .iter()
                .enumerate()
                .filter(|(e, a)| a.0 == here && r[*e] > VALUE_TOL)
                .max_by(|a, b| r[a.0].total_cmp(&r[b.0]).then(b.0.cmp(&a.0)));
            let Some((e, &(_, j, _))) = next else {
                break 'outer;
            };
            if let Some(at) = nodes.iter().position(|&v| v == j) {
                // Cancel the cycle closed by this arc.
                let cycle: Vec<usize> = used[at..].iter().copied().chain([e]).collect();
                let m = cycle.iter().map(|&c| r[c]).fold(f64::INFINITY, f64::min);
                for c in cycle {
                    r[c] -= m;
                }
                continue 'outer;
            }
            used.push(e);
            nodes.push(j);
        }
        let m = used.iter().map(|&c| r[c]).fold(f64::INFINITY, f64::min);
        for &c in &used {
            r[c] -= m;
        }
        if used.is_empty() {
            break;
        }
        out.push((nodes, m));
    }
    out
}

/// Arc indices of some directed cycle among arcs with positive rate.
fn find_cycle(arcs: &[(usize, usize, f64)], r: &[f64]) -> Option<Vec<usize>> {
    let n = arcs.iter().map(|a| a.0.max(a.1) + 1).max().unwrap_or(0);
    // 0 unvisited, 1 on the stack, 2 finished.
    let mut state = vec![0u8; n];
    let mut via: Vec<Option<usize>> = vec![None; n];
    for root in 0..n {
        if state[root] != 0 {
            continue;
        }
        // Stack of (node, next arc index to try).
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            let Some(e) = (*next..arcs.len()).find(|&e| arcs[e].0 == v && r[e] > VALUE_TOL) else {
                state[v] = 2;
                stack.pop();
                continue;
            };
            *next = e + 1;
            let w = arcs[e].1;
            match state[w] {
                0 => {
                    state[w] = 1;
                    via[w] = Some(e);
                    stack.push((w, 0));
                }
                1 => {
                    let mut cycle = vec![e];
                    let mut at = v;
                    while at != w {
                        let a = via[at].expect("stack nodes have a parent arc");
                        cycle.push(a);
                        at = arcs[a].0;
                    }
                    return Some(cycle);
                }
                _ => {}
            }
        }
    }
    None
}

/// Returns `Θ_L + Θ_N` of service `id` as recorded in the plan.
pub fn e2e_delay(plan: &SlicePlan, id: &str) -> Result<f64, PlanError> {
    let svc = plan
        .service(id)
        .ok_or_else(|| PlanError::UnknownService(id.to_string()))?;
    let comm: f64 = svc
        .segments
        .iter()
        .map(|s| s.paths.iter().map(|p| p.delay).fold(0.0, f64::max))
        .sum();
    Ok(comm + svc.delay.nfv)
}

/// Outcome of one validated family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyCheck {
    pub family: String,
    pub passed: bool,
    /// Smallest `limit - value` seen; negative on violation. Structural
    /// checks report `0` when passing and `-1` when failing.
    pub worst_slack: f64,
    pub offending: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<FamilyCheck>,
}

/// Families checked by [`validate`], in report order.
pub const VALIDATED_FAMILIES: [&str; 13] = [
    "one_function_per_node",
    "exactly_one_node",
    "node_capacity",
    "activation",
    "segment_rate",
    "path_link_coupling",
    "rate_link_coupling",
    "link_capacity",
    "rate_conservation",
    "path_conservation",
    "e2e_latency",
    "path_budget",
    "chain_order",
];

impl ValidationReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn check(&self, family: &str) -> Option<&FamilyCheck> {
        self.checks.iter().find(|c| c.family == family)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(
                f,
                "{:<22} {} worst_slack={:.6}",
                c.family,
                if c.passed { "PASS" } else { "FAIL" },
                c.worst_slack
            )?;
            if !c.offending.is_empty() {
                write!(f, " offending={}", c.offending.join(","))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

struct Check {
    family: &'static str,
    slack: f64,
    offending: Vec<String>,
}

impl Check {
    fn new(family: &'static str) -> Self {
        Check {
            family,
            slack: f64::INFINITY,
            offending: Vec::new(),
        }
    }

    /// Records `value <= limit`.
    fn le(&mut self, what: impl FnOnce() -> String, value: f64, limit: f64) {
        let slack = limit - value;
        self.slack = self.slack.min(slack);
        if slack < -CHECK_TOL || slack.is_nan() {
            self.offending.push(what());
        }
    }

    fn require(&mut self, what: impl FnOnce() -> String, ok: bool) {
        self.slack = self.slack.min(if ok { 0.0 } else { -1.0 });
        if !ok {
            self.offending.push(what());
        }
    }

    fn finish(self) -> FamilyCheck {
        FamilyCheck {
            family: self.family.to_string(),
            passed: self.offending.is_empty(),
            worst_slack: if self.slack.is_finite() { self.slack } else { 0.0 },
            offending: self.offending,
        }
    }
}

/// Re-checks every model constraint family on `plan` using instance data
/// only.
pub fn validate(plan: &SlicePlan, inst: &Instance) -> ValidationReport {
    let mut one_fn = Check::new("one_function_per_node");
    let mut one_node = Check::new("exactly_one_node");
    let mut node_cap = Check::new("node_capacity");
    let mut activation = Check::new("activation");
    let mut seg_rate = Check::new("segment_rate");
    let mut path_link = Check::new("path_link_coupling");
    let mut rate_link = Check::new("rate_link_coupling");
    let mut link_cap = Check::new("link_capacity");
    let mut rate_cons = Check::new("rate_conservation");
    let mut path_cons = Check::new("path_conservation");
    let mut e2e = Check::new("e2e_latency");
    let mut budget = Check::new("path_budget");
    let mut order = Check::new("chain_order");

    let delays = link_delays(inst);
    let mut node_load: BTreeMap<&str, f64> = BTreeMap::new();
    let mut link_load: BTreeMap<(String, String), f64> = BTreeMap::new();

    order.require(
        || "service set differs from the instance".into(),
        plan.services.len() == inst.services.len()
            && plan.services.iter().zip(&inst.services).all(|(a, b)| a.id == b.id),
    );

    for req in &inst.services {
        let Some(svc) = plan.service(&req.id) else {
            continue;
        };
        let len = req.chain.len();
        let id = &req.id;

        // Placements: exactly one capable cloud node per chain position.
        let mut at: Vec<Option<&str>> = vec![None; len + 2];
        at[0] = Some(req.source.as_str());
        at[len + 1] = Some(req.destination.as_str());
        for s in 1..=len {
            let here: Vec<&Placement> = svc.placements.iter().filter(|p| p.position == s).collect();
            let ok = here.len() == 1 && inst.cloud(&here[0].node).is_some_and(|c| c.supports(&req.chain[s - 1]));
            one_node.require(|| format!("{id}:s={s}"), ok);
            if here.len() == 1 {
                at[s] = Some(here[0].node.as_str());
                order.require(|| format!("{id}:s={s}:function"), here[0].function == req.chain[s - 1]);
                if inst.is_cloud(&here[0].node) {
                    *node_load.entry(here[0].node.as_str()).or_default() += req.rates[s];
                }
                activation.require(
                    || format!("{id}:s={s}:{}", here[0].node),
                    plan.activated.iter().any(|a| a == &here[0].node),
                );
            }
        }
        order.require(
            || format!("{id}:placement positions"),
            svc.placements.iter().all(|p| (1..=len).contains(&p.position)),
        );
        let mut per_node: BTreeMap<&str, usize> = BTreeMap::new();
        for p in &svc.placements {
            *per_node.entry(p.node.as_str()).or_default() += 1;
        }
        for (v, n) in per_node {
            one_fn.le(|| format!("{id}:{v}"), n as f64, 1.0);
        }

        // Segments: one per consecutive position pair, in order.
        order.require(
            || format!("{id}:segments"),
            svc.segments.len() == len + 1 && svc.segments.iter().enumerate().all(|(s, g)| g.index == s),
        );
        let mut comm = 0.0;
        for seg in &svc.segments {
            let s = seg.index;
            if s > len {
                continue;
            }
            let (Some(tail), Some(head)) = (at[s], at[s + 1]) else {
                continue;
            };
            let lambda = req.rates[s];
            order.require(|| format!("{id}:s={s}:endpoints"), seg.from == tail && seg.to == head);
            budget.le(
                || format!("{id}:s={s}"),
                seg.paths.len() as f64,
                plan.path_budget as f64,
            );
            let total: f64 = seg.paths.iter().map(|p| p.rate).sum();
            seg_rate.le(|| format!("{id}:s={s}:sum"), (total - lambda).abs(), 0.0);

            let mut balance: BTreeMap<&str, f64> = BTreeMap::new();
            let mut worst = 0.0f64;
            for (n, path) in seg.paths.iter().enumerate() {
                let walk_ok = path.nodes.first().map(String::as_str) == Some(tail)
                    && path.nodes.last().map(String::as_str) == Some(head)
                    && path.nodes.len() >= 2;
                path_cons.require(|| format!("{id}:s={s}:path={n}"), walk_ok);
                let known = path
                    .nodes
                    .windows(2)
                    .all(|w| delays.contains_key(&(w[0].as_str(), w[1].as_str())));
                path_link.require(|| format!("{id}:s={s}:path={n}"), known);
                rate_link.require(
                    || format!("{id}:s={s}:path={n}"),
                    path.rate > 0.0 && path.rate <= lambda + CHECK_TOL,
                );
                for w in path.nodes.windows(2) {
                    *balance.entry(w[0].as_str()).or_default() -= path.rate;
                    *balance.entry(w[1].as_str()).or_default() += path.rate;
                    *link_load.entry((w[0].clone(), w[1].clone())).or_default() += path.rate;
                }
                if let Some(d) = walk_delay(&path.nodes, &delays) {
                    worst = worst.max(d);
                }
            }
            for (v, b) in balance {
                let want = if v == tail {
                    -total
                } else if v == head {
                    total
                } else {
                    0.0
                };
                rate_cons.le(|| format!("{id}:s={s}:{v}"), (b - want).abs(), 0.0);
            }
            comm += worst;
        }
        let nfv = nfv_delay_checked(inst, req, &at);
        e2e.le(|| id.clone(), comm + nfv, req.latency_threshold);
    }

    for c in &inst.cloud_nodes {
        let load = node_load.get(c.node.as_str()).copied().unwrap_or(0.0);
        node_cap.le(|| c.node.clone(), load, c.capacity);
    }
    for a in &plan.activated {
        activation.require(|| format!("activated:{a}"), inst.is_cloud(a));
    }
    for ((i, j), load) in &link_load {
        match inst.link(i, j) {
            Some(l) => link_cap.le(|| format!("{i}->{j}"), *load, l.capacity),
            None => link_cap.require(|| format!("{i}->{j}"), false),
        }
    }

    ValidationReport {
        checks: [
            one_fn, one_node, node_cap, activation, seg_rate, path_link, rate_link, link_cap, rate_cons, path_cons,
            e2e, budget, order,
        ]
        .into_iter()
        .map(Check::finish)
        .collect(),
    }
}

fn nfv_delay_checked(inst: &Instance, req: &crate::net_model::ServiceRequest, at: &[Option<&str>]) -> f64 {
    (1..=req.chain.len())
        .map(|s| {
            at[s]
                .and_then(|v| inst.cloud(v))
                .and_then(|c| c.nfv_delay(&req.chain[s - 1]))
                .unwrap_or(0.0)
        })
        .sum()
}

#[cfg(test)]
mod tests;
