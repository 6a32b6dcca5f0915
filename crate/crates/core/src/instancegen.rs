//! Seeded random instances and the bundled six-link toy network.
//!
//! Random networks place nodes uniformly in a square and connect each
//! unordered pair with a fixed probability, creating both directions with a
//! shared capacity. Link delay is the Euclidean length divided by the mean
//! shortest-path length over all ordered pairs. Services draw from their own
//! random stream, so the first `n` services of a seed are the same whatever
//! the requested service count.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{build, BuildOptions, Variant};
use crate::net_model::{
    all_pairs_shortest, mean_finite_distance, CloudNode, HostedFunction, Instance, Link, Network, ServiceRequest,
};

const MAX_TOPOLOGY_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub node_count: usize,
    pub cloud_count: usize,
    pub region_side: f64,
    pub link_probability: f64,
    pub node_capacity: (f64, f64),
    pub link_capacity: (f64, f64),
    pub function_count: usize,
    pub chain_length: usize,
    pub nfv_delay: (f64, f64),
    pub rate: f64,
    pub threshold_slack: (f64, f64),
    pub service_count: usize,
    pub path_budget: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            node_count: 6,
            cloud_count: 3,
            region_side: 100.0,
            link_probability: 0.6,
            node_capacity: (6.0, 12.0),
            link_capacity: (0.5, 3.5),
            function_count: 5,
            chain_length: 3,
            nfv_delay: (0.8, 1.2),
            rate: 1.0,
            threshold_slack: (0.0, 2.0),
            service_count: 1,
            path_budget: 2,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GenError {
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),
    #[error("no connected topology after {0} attempts")]
    RetryExhausted(usize),
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidConfig(m.to_string()));
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if self.node_count < 3 {
            return bad("need at least three nodes");
        }
        if self.cloud_count == 0 || self.cloud_count + 2 > self.node_count {
            return bad("cloud count must be in 1..=node_count-2");
        }
        if !(0.0..=1.0).contains(&self.link_probability) {
            return bad("link probability must lie in [0, 1]");
        }
        if !(self.region_side > 0.0 && self.region_side.is_finite()) {
            return bad("region side must be positive");
        }
        for (name, r) in [
            ("node capacity", self.node_capacity),
            ("link capacity", self.link_capacity),
            ("nfv delay", self.nfv_delay),
            ("threshold slack", self.threshold_slack),
        ] {
            if !range_ok(r) || r.0 < 0.0 {
                return bad(&format!("{name} range must be non-empty and non-negative"));
            }
        }
        if self.link_capacity.0 <= 0.0 || self.node_capacity.0 <= 0.0 {
            return bad("capacities must be positive");
        }
        if self.function_count < 2 {
            return bad("need at least two functions");
        }
        if self.chain_length == 0 || self.chain_length > self.function_count {
            return bad("chain length must be in 1..=function_count");
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad("rate must be positive");
        }
        if self.path_budget == 0 {
            return bad("path budget must be at least 1");
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

struct Topology {
    clouds: Vec<usize>,
    edges: Vec<(usize, usize, f64)>,
    dist: Vec<Vec<f64>>,
    mean: f64,
}

fn sample_topology(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Result<Topology, GenError> {
    let n = cfg.node_count;
    for _ in 0..MAX_TOPOLOGY_ATTEMPTS {
        let coords: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(0.0..cfg.region_side), rng.gen_range(0.0..cfg.region_side)))
            .collect();
        let mut clouds = rand::seq::index::sample(rng, n, cfg.cloud_count).into_vec();
        clouds.sort_unstable();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(cfg.link_probability) {
                    let (a, b) = (coords[i], coords[j]);
                    edges.push((i, j, ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()));
                }
            }
        }
        let arcs: Vec<(usize, usize, f64)> = edges.iter().flat_map(|&(i, j, w)| [(i, j, w), (j, i, w)]).collect();
        let dist = all_pairs_shortest(n, &arcs);
        let terminals: Vec<usize> = (0..n).filter(|v| !clouds.contains(v)).collect();
        let connected = terminals
            .iter()
            .all(|&a| terminals.iter().all(|&b| dist[a][b].is_finite()));
        if connected {
            let mean = mean_finite_distance(&dist);
            return Ok(Topology {
                clouds,
                edges,
                dist,
                mean,
            });
        }
    }
    Err(GenError::RetryExhausted(MAX_TOPOLOGY_ATTEMPTS))
}

/// Random instance per `cfg`; identical output for identical configs.
pub fn generate(cfg: &GenConfig) -> Result<Instance, GenError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let topo = sample_topology(cfg, &mut rng)?;
    let name = |v: usize| format!("n{v}");
    let fname = |f: usize| format!("f{}", f + 1);

    let mut links = Vec::with_capacity(topo.edges.len() * 2);
    for &(i, j, len) in &topo.edges {
        let capacity = uniform(&mut rng, cfg.link_capacity);
        let delay = len / topo.mean;
        links.push(Link {
            tail: name(i),
            head: name(j),
            capacity,
            delay,
        });
        links.push(Link {
            tail: name(j),
            head: name(i),
            capacity,
            delay,
        });
    }

    let universal = rng.gen_range(0..topo.clouds.len());
    let mut cloud_nodes = Vec::with_capacity(topo.clouds.len());
    for (idx, &v) in topo.clouds.iter().enumerate() {
        let capacity = uniform(&mut rng, cfg.node_capacity);
        let mut funcs: Vec<usize> = if idx == universal {
            (0..cfg.function_count).collect()
        } else {
            rand::seq::index::sample(&mut rng, cfg.function_count, 2).into_vec()
        };
        funcs.sort_unstable();
        let functions = funcs
            .into_iter()
            .map(|f| HostedFunction {
                id: fname(f),
                delay: uniform(&mut rng, cfg.nfv_delay),
            })
            .collect();
        cloud_nodes.push(CloudNode {
            node: name(v),
            capacity,
            functions,
        });
    }

    let terminals: Vec<usize> = (0..cfg.node_count).filter(|v| !topo.clouds.contains(v)).collect();
    let mut srng = ChaCha8Rng::seed_from_u64(cfg.seed);
    srng.set_stream(1);
    let mut services = Vec::with_capacity(cfg.service_count);
    for k in 0..cfg.service_count {
        let pick = rand::seq::index::sample(&mut srng, terminals.len(), 2);
        let (src, dst) = (terminals[pick.index(0)], terminals[pick.index(1)]);
        let mut chain: Vec<usize> =
            rand::seq::index::sample(&mut srng, cfg.function_count, cfg.chain_length).into_vec();
        chain.shuffle(&mut srng);
        let alpha = uniform(&mut srng, cfg.threshold_slack);
        let dist = topo.dist[src][dst];
        services.push(ServiceRequest {
            id: format!("k{}", k + 1),
            source: name(src),
            destination: name(dst),
            chain: chain.into_iter().map(fname).collect(),
            rates: vec![cfg.rate; cfg.chain_length + 1],
            latency_threshold: 3.0 + 6.0 * dist / topo.mean + alpha,
        });
    }

    let network = Network {
        nodes: (0..cfg.node_count).map(name).collect(),
        links,
        cloud_nodes,
    };
    let mut inst = Instance::new(network, services, cfg.path_budget);
    inst.seed = Some(cfg.seed);
    Ok(inst)
}

fn link(tail: &str, head: &str, capacity: f64, delay: f64) -> Link {
    Link {
        tail: tail.into(),
        head: head.into(),
        capacity,
        delay,
    }
}

fn service(id: &str, src: &str, dst: &str, f: &str, rate: f64, threshold: f64) -> ServiceRequest {
    ServiceRequest {
        id: id.into(),
        source: src.into(),
        destination: dst.into(),
        chain: vec![f.into()],
        rates: vec![rate, rate],
        latency_threshold: threshold,
    }
}

/// Five-node toy network: cloud nodes C (hosts f2) and E (hosts f1, f2).
pub fn fig1_network() -> Network {
    let hosted = |id: &str| HostedFunction {
        id: id.into(),
        delay: 1.0,
    };
    Network {
        nodes: ["A", "B", "C", "D", "E"].map(String::from).to_vec(),
        links: vec![
            link("A", "B", 2.0, 1.0),
            link("A", "C", 2.0, 1.0),
            link("B", "E", 2.0, 1.0),
            link("C", "E", 2.0, 1.0),
            link("C", "B", 2.0, 1.0),
            link("E", "D", 4.0, 1.0),
            link("D", "B", 2.0, 1.0),
        ],
        cloud_nodes: vec![
            CloudNode {
                node: "C".into(),
                capacity: 4.0,
                functions: vec![hosted("f2")],
            },
            CloudNode {
                node: "E".into(),
                capacity: 4.0,
                functions: vec![hosted("f1"), hosted("f2")],
            },
        ],
    }
}

/// Toy network with services I (A to D through f1) and II (A to B
/// through f2), path budget 2.
pub fn fig1_instance() -> Instance {
    Instance::new(
        fig1_network(),
        vec![
            service("I", "A", "D", "f1", 1.0, 4.0),
            service("II", "A", "B", "f2", 1.0, 3.0),
        ],
        2,
    )
}

/// Toy network with one rate-4 service from A to D through f1.
pub fn fig1_rate4_instance() -> Instance {
    Instance::new(fig1_network(), vec![service("I", "A", "D", "f1", 4.0, 4.0)], 2)
}

pub fn fig1_fixtures() -> Vec<(&'static str, Instance)> {
    vec![("fig1", fig1_instance()), ("fig1-rate4", fig1_rate4_instance())]
}

/// Small random instance whose full model has at most `max_binaries`
/// binary columns: 3 or 4 nodes, single-function chains, sparse arcs and
/// tight capacities so that a fair share of draws is infeasible. Services
/// are dropped from the back until the model fits.
pub fn generate_micro(seed: u64, max_binaries: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(3..=4usize);
        let nodes: Vec<String> = (0..n).map(|v| format!("m{v}")).collect();
        let cloud_count = rng.gen_range(1..=n - 2);
        let clouds: Vec<usize> = (n - cloud_count..n).collect();
        let mut links = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.gen_bool(0.45) {
                    links.push(Link {
                        tail: nodes[i].clone(),
                        head: nodes[j].clone(),
                        capacity: rng.gen_range(1..=3) as f64,
                        delay: rng.gen_range(1..=2) as f64,
                    });
                }
            }
        }
        if links.is_empty() {
            continue;
        }
        let cloud_nodes: Vec<CloudNode> = clouds
            .iter()
            .enumerate()
            .map(|(c, &v)| {
                let mut functions = vec![HostedFunction {
                    id: "f1".into(),
                    delay: 1.0,
                }];
                if c > 0 || rng.gen_bool(0.5) {
                    functions.push(HostedFunction {
                        id: "f2".into(),
                        delay: rng.gen_range(0..=1) as f64,
                    });
                }
                CloudNode {
                    node: nodes[v].clone(),
                    capacity: rng.gen_range(1..=4) as f64,
                    functions,
                }
            })
            .collect();
        let terminals: Vec<usize> = (0..n - cloud_count).collect();
        if terminals.len() < 2 {
            continue;
        }
        let mut services = Vec::new();
        for k in 0..rng.gen_range(1..=3usize) {
            let pick = rand::seq::index::sample(&mut rng, terminals.len(), 2);
            let f = if rng.gen_bool(0.5) { "f1" } else { "f2" };
            let rate = rng.gen_range(1..=2) as f64;
            let threshold = rng.gen_range(2..=7) as f64;
            services.push(service(
                &format!("k{}", k + 1),
                &nodes[terminals[pick.index(0)]],
                &nodes[terminals[pick.index(1)]],
                f,
                rate,
                threshold,
            ));
        }
        let path_budget = rng.gen_range(1..=2);
        let network = Network {
            nodes: nodes.clone(),
            links,
            cloud_nodes,
        };
        let mut inst = Instance::new(network, services, path_budget);
        inst.seed = Some(seed);
        while !inst.services.is_empty() {
            match build(&inst, &BuildOptions::new(Variant::Full)) {
                Ok(m) if m.num_binaries() <= max_binaries => return inst,
                _ => {
                    inst.services.pop();
                }
            }
        }
    }
}
