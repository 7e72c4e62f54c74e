//! Problem data: services, nodes, users, placements.
//!
//! Two reward models share the same services and nodes:
//!
//! * **GSP** (general service placement): user `k` demands service `demand`
//!   and earns `rewards[j]` when served from node `j`; the user is served by
//!   the best hosting node.
//! * **SPSC** (service placement with set constraints): user `k` earns
//!   `weight` iff its service is hosted on at least one node of `node_set`.
//!
//! Feasibility is the same for both: the total size of the services hosted
//! on a node must not exceed its capacity.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack applied to node capacities when checking feasibility.
pub const DEFAULT_FEASIBILITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Service {
    pub size: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub capacity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GspUser {
    pub demand: usize,
    /// Reward per node, indexed by node id.
    pub rewards: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpscUser {
    pub demand: usize,
    /// Sorted, duplicate-free node ids.
    pub node_set: Vec<usize>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GspInstance {
    pub services: Vec<Service>,
    pub nodes: Vec<Node>,
    pub users: Vec<GspUser>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpscInstance {
    pub services: Vec<Service>,
    pub nodes: Vec<Node>,
    pub users: Vec<SpscUser>,
}

/// Shared view of the resource side of an instance.
pub trait Resources {
    fn services(&self) -> &[Service];
    fn nodes(&self) -> &[Node];

    fn size(&self, service: usize) -> f64 {
        self.services()[service].size
    }

    fn capacity(&self, node: usize) -> f64 {
        self.nodes()[node].capacity
    }
}

impl Resources for GspInstance {
    fn services(&self) -> &[Service] {
        &self.services
    }
    fn nodes(&self) -> &[Node] {
        &self.nodes
    }
}

impl Resources for SpscInstance {
    fn services(&self) -> &[Service] {
        &self.services
    }
    fn nodes(&self) -> &[Node] {
        &self.nodes
    }
}

fn validate_resources(services: &[Service], nodes: &[Node]) -> Result<()> {
    for (i, s) in services.iter().enumerate() {
        if !(s.size.is_finite() && s.size > 0.0) {
            return Err(Error::input(format!("service {i} has non-positive size {}", s.size)));
        }
    }
    for (j, n) in nodes.iter().enumerate() {
        if !(n.capacity.is_finite() && n.capacity > 0.0) {
            return Err(Error::input(format!("node {j} has non-positive capacity {}", n.capacity)));
        }
    }
    Ok(())
}

impl GspInstance {
    pub fn new(services: Vec<Service>, nodes: Vec<Node>, users: Vec<GspUser>) -> Result<Self> {
        let inst = GspInstance { services, nodes, users };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        validate_resources(&self.services, &self.nodes)?;
        for (k, u) in self.users.iter().enumerate() {
            if u.demand >= self.services.len() {
                return Err(Error::input(format!("user {k} demands unknown service {}", u.demand)));
            }
            if u.rewards.len() != self.nodes.len() {
                return Err(Error::input(format!(
                    "user {k} lists {} rewards for {} nodes",
                    u.rewards.len(),
                    self.nodes.len()
                )));
            }
            if let Some(r) = u.rewards.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
                return Err(Error::input(format!("user {k} has invalid reward {r}")));
            }
        }
        Ok(())
    }
}

impl SpscInstance {
    /// Builds a validated instance; node sets are sorted and deduplicated.
    pub fn new(services: Vec<Service>, nodes: Vec<Node>, mut users: Vec<SpscUser>) -> Result<Self> {
        for u in &mut users {
            u.node_set.sort_unstable();
            u.node_set.dedup();
        }
        let inst = SpscInstance { services, nodes, users };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        validate_resources(&self.services, &self.nodes)?;
        for (k, u) in self.users.iter().enumerate() {
            if u.demand >= self.services.len() {
                return Err(Error::input(format!("user {k} demands unknown service {}", u.demand)));
            }
            if !(u.weight.is_finite() && u.weight > 0.0) {
                return Err(Error::input(format!("user {k} has non-positive weight {}", u.weight)));
            }
            if u.node_set.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::input(format!("user {k} node set is not sorted and unique")));
            }
            if let Some(j) = u.node_set.iter().find(|&&j| j >= self.nodes.len()) {
                return Err(Error::input(format!("user {k} references unknown node {j}")));
            }
        }
        Ok(())
    }

    pub fn total_weight(&self) -> f64 {
        self.users.iter().map(|u| u.weight).sum()
    }
}

/// Per-service sets of hosting nodes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Placement {
    hosted: Vec<BTreeSet<usize>>,
}

impl Placement {
    pub fn empty(n_services: usize) -> Self {
        Placement { hosted: vec![BTreeSet::new(); n_services] }
    }

    pub fn n_services(&self) -> usize {
        self.hosted.len()
    }

    /// Returns true if the pair was not already present.
    pub fn insert(&mut self, service: usize, node: usize) -> bool {
        self.hosted[service].insert(node)
    }

    pub fn hosts(&self, service: usize, node: usize) -> bool {
        self.hosted.get(service).is_some_and(|s| s.contains(&node))
    }

    pub fn nodes_of(&self, service: usize) -> &BTreeSet<usize> {
        &self.hosted[service]
    }

    /// All (service, node) pairs in ascending order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.hosted.iter().enumerate().flat_map(|(i, nodes)| nodes.iter().map(move |&j| (i, j)))
    }

    pub fn len(&self) -> usize {
        self.hosted.iter().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.hosted.iter().all(BTreeSet::is_empty)
    }

    pub fn union_with(&mut self, other: &Placement) {
        for (i, j) in other.pairs() {
            self.insert(i, j);
        }
    }

    /// True iff some node of `node_set` hosts `service`.
    pub fn serves(&self, service: usize, node_set: &[usize]) -> bool {
        let hosted = &self.hosted[service];
        !hosted.is_empty() && node_set.iter().any(|j| hosted.contains(j))
    }

    /// Total size hosted on each node.
    pub fn loads<R: Resources + ?Sized>(&self, inst: &R) -> Vec<f64> {
        let mut load = vec![0.0; inst.nodes().len()];
        for (i, j) in self.pairs() {
            load[j] += inst.size(i);
        }
        load
    }

    pub fn to_map(&self) -> BTreeMap<usize, Vec<usize>> {
        self.hosted
            .iter()
            .enumerate()
            .filter(|(_, nodes)| !nodes.is_empty())
            .map(|(i, nodes)| (i, nodes.iter().copied().collect()))
            .collect()
    }

    pub fn from_map(n_services: usize, map: &BTreeMap<usize, Vec<usize>>) -> Result<Self> {
        let mut p = Placement::empty(n_services);
        for (&i, nodes) in map {
            if i >= n_services {
                return Err(Error::input(format!("placement references unknown service {i}")));
            }
            for &j in nodes {
                p.insert(i, j);
            }
        }
        Ok(p)
    }
}

fn check_ids<R: Resources + ?Sized>(p: &Placement, inst: &R) -> Result<()> {
    if p.n_services() != inst.services().len() {
        return Err(Error::input(format!(
            "placement covers {} services, instance has {}",
            p.n_services(),
            inst.services().len()
        )));
    }
    if let Some((i, j)) = p.pairs().find(|&(_, j)| j >= inst.nodes().len()) {
        return Err(Error::input(format!("service {i} placed on unknown node {j}")));
    }
    Ok(())
}

/// Checks the capacity constraint on every node, allowing a relative slack of `tolerance`.
pub fn check_feasible<R: Resources + ?Sized>(p: &Placement, inst: &R, tolerance: f64) -> Result<bool> {
    check_ids(p, inst)?;
    Ok(p.loads(inst).iter().zip(inst.nodes()).all(|(load, node)| *load <= node.capacity * (1.0 + tolerance)))
}

/// Sum over users of the best reward among the nodes hosting their service.
pub fn gsp_reward(p: &Placement, inst: &GspInstance) -> f64 {
    inst.users.iter().map(|u| p.nodes_of(u.demand).iter().map(|&j| u.rewards[j]).fold(0.0, f64::max)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpscReward {
    pub total: f64,
    pub satisfied: usize,
}

pub fn spsc_reward(p: &Placement, inst: &SpscInstance) -> SpscReward {
    let mut total = 0.0;
    let mut satisfied = 0;
    for u in &inst.users {
        if p.serves(u.demand, &u.node_set) {
            total += u.weight;
            satisfied += 1;
        }
    }
    SpscReward { total, satisfied }
}

/// Either kind of instance, as read from an instance file.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyInstance {
    Gsp(GspInstance),
    Spsc(SpscInstance),
}

/// On-disk instance document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub services: Vec<Service>,
    pub nodes: Vec<Node>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gsp_users: Option<Vec<GspUser>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spsc_users: Option<Vec<SpscUser>>,
    /// Free-form generator record, carried through unchanged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl InstanceFile {
    pub fn from_gsp(inst: &GspInstance) -> Self {
        InstanceFile {
            services: inst.services.clone(),
            nodes: inst.nodes.clone(),
            gsp_users: Some(inst.users.clone()),
            spsc_users: None,
            provenance: None,
        }
    }

    pub fn from_spsc(inst: &SpscInstance) -> Self {
        InstanceFile {
            services: inst.services.clone(),
            nodes: inst.nodes.clone(),
            gsp_users: None,
            spsc_users: Some(inst.users.clone()),
            provenance: None,
        }
    }

    pub fn into_instance(self) -> Result<AnyInstance> {
        match (self.gsp_users, self.spsc_users) {
            (Some(users), None) => Ok(AnyInstance::Gsp(GspInstance::new(self.services, self.nodes, users)?)),
            (None, Some(users)) => Ok(AnyInstance::Spsc(SpscInstance::new(self.services, self.nodes, users)?)),
            (Some(_), Some(_)) => Err(Error::input("instance lists both gsp_users and spsc_users")),
            (None, None) => Err(Error::input("instance lists neither gsp_users nor spsc_users")),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

pub fn read_placement(path: &Path, n_services: usize) -> Result<Placement> {
    let text = std::fs::read_to_string(path)?;
    let map: BTreeMap<usize, Vec<usize>> = serde_json::from_str(&text)?;
    Placement::from_map(n_services, &map)
}

pub fn write_placement(path: &Path, p: &Placement) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(&p.to_map())? + "\n")?;
    Ok(())
}
