//! Exact SPSC optimum by enumeration.
//!
//! For every node the maximal feasible subsets of the services relevant there
//! are listed (adding a service never lowers the reward, so non-maximal
//! subsets can be skipped). A depth-first search then picks one subset per
//! node, pruning with the weight of users that remaining nodes could still
//! serve.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{spsc_reward, Placement, Resources, SpscInstance};

use super::fits;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OracleBudget {
    pub max_services: usize,
    pub max_nodes: usize,
    pub max_users: usize,
    /// Cap on listed subsets plus visited search states.
    pub max_enumeration: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_services: 32, max_nodes: 8, max_users: 256, max_enumeration: 2_000_000 }
    }
}

struct Counter {
    used: u64,
    cap: u64,
}

impl Counter {
    fn tick(&mut self) -> Result<()> {
        self.used += 1;
        if self.used > self.cap {
            Err(Error::OracleTooLarge(format!("enumeration exceeded {} states", self.cap)))
        } else {
            Ok(())
        }
    }
}

/// Maximal subsets of `items` (ascending sizes not required) fitting in `capacity`.
fn maximal_subsets(items: &[(usize, f64)], capacity: f64, counter: &mut Counter) -> Result<Vec<Vec<usize>>> {
    // suffix[t] = total size of items[t..]
    let mut suffix = vec![0.0; items.len() + 1];
    for t in (0..items.len()).rev() {
        suffix[t] = suffix[t + 1] + items[t].1;
    }
    let mut out = Vec::new();
    let mut chosen = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn rec(
        t: usize,
        load: f64,
        items: &[(usize, f64)],
        suffix: &[f64],
        capacity: f64,
        chosen: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        counter: &mut Counter,
    ) -> Result<()> {
        if t == items.len() {
            let maximal =
                items.iter().enumerate().all(|(idx, &(_, s))| chosen.contains(&idx) || !fits(load, s, capacity));
            if maximal {
                counter.tick()?;
                out.push(chosen.iter().map(|&idx| items[idx].0).collect());
            }
            return Ok(());
        }
        let s = items[t].1;
        if fits(load, s, capacity) {
            chosen.push(t);
            rec(t + 1, load + s, items, suffix, capacity, chosen, out, counter)?;
            chosen.pop();
            // Excluding t cannot be maximal if t fits even after taking everything after it.
            if fits(load + suffix[t + 1], s, capacity) {
                return Ok(());
            }
        }
        rec(t + 1, load, items, suffix, capacity, chosen, out, counter)
    }
    rec(0, 0.0, items, &suffix, capacity, &mut chosen, &mut out, counter)?;
    Ok(out)
}

struct Search<'a> {
    inst: &'a SpscInstance,
    /// Per node, per subset: users it serves.
    served: Vec<Vec<Vec<usize>>>,
    subsets: Vec<Vec<Vec<usize>>>,
    /// Per user: last node index able to serve it, if any.
    last_node: Vec<Option<usize>>,
    cover: Vec<u32>,
    choice: Vec<usize>,
    best: f64,
    best_choice: Vec<usize>,
    counter: Counter,
}

impl Search<'_> {
    fn dfs(&mut self, j: usize, value: f64) -> Result<()> {
        self.counter.tick()?;
        let n_nodes = self.subsets.len();
        if j == n_nodes {
            if value > self.best {
                self.best = value;
                self.best_choice = self.choice.clone();
            }
            return Ok(());
        }
        let reachable: f64 = self
            .inst
            .users
            .iter()
            .enumerate()
            .filter(|(k, _)| self.cover[*k] == 0 && self.last_node[*k].is_some_and(|l| l >= j))
            .map(|(_, u)| u.weight)
            .sum();
        if value + reachable <= self.best {
            return Ok(());
        }
        for s in 0..self.subsets[j].len() {
            let mut gained = 0.0;
            for &k in &self.served[j][s] {
                if self.cover[k] == 0 {
                    gained += self.inst.users[k].weight;
                }
                self.cover[k] += 1;
            }
            self.choice[j] = s;
            self.dfs(j + 1, value + gained)?;
            for &k in &self.served[j][s] {
                self.cover[k] -= 1;
            }
        }
        Ok(())
    }
}

/// Exact optimum and a placement achieving it.
pub fn brute_force_optimal(inst: &SpscInstance, budget: &OracleBudget) -> Result<(Placement, f64)> {
    inst.validate()?;
    if inst.services.len() > budget.max_services
        || inst.nodes.len() > budget.max_nodes
        || inst.users.len() > budget.max_users
    {
        return Err(Error::OracleTooLarge(format!(
            "{} services, {} nodes, {} users exceed the oracle budget",
            inst.services.len(),
            inst.nodes.len(),
            inst.users.len()
        )));
    }
    let n_nodes = inst.nodes.len();
    let mut counter = Counter { used: 0, cap: budget.max_enumeration };
    let mut subsets = Vec::with_capacity(n_nodes);
    let mut served: Vec<Vec<Vec<usize>>> = Vec::with_capacity(n_nodes);
    for j in 0..n_nodes {
        let mut relevant: Vec<usize> = inst
            .users
            .iter()
            .filter(|u| u.node_set.binary_search(&j).is_ok() && inst.size(u.demand) <= inst.capacity(j) * (1.0 + 1e-9))
            .map(|u| u.demand)
            .collect();
        relevant.sort_unstable();
        relevant.dedup();
        let items: Vec<(usize, f64)> = relevant.iter().map(|&i| (i, inst.size(i))).collect();
        let subs = maximal_subsets(&items, inst.capacity(j), &mut counter)?;
        served.push(
            subs.iter()
                .map(|sub| {
                    (0..inst.users.len())
                        .filter(|&k| {
                            let u = &inst.users[k];
                            u.node_set.binary_search(&j).is_ok() && sub.binary_search(&u.demand).is_ok()
                        })
                        .collect()
                })
                .collect(),
        );
        subsets.push(subs);
    }
    let last_node = inst
        .users
        .iter()
        .map(|u| {
            u.node_set
                .iter()
                .rev()
                .find(|&&j| {
                    served[j].iter().any(|ks: &Vec<usize>| ks.iter().any(|&k| inst.users[k].demand == u.demand))
                })
                .copied()
        })
        .collect();
    let mut search = Search {
        inst,
        served,
        subsets,
        last_node,
        cover: vec![0; inst.users.len()],
        choice: vec![0; n_nodes],
        best: -1.0,
        best_choice: vec![0; n_nodes],
        counter,
    };
    search.dfs(0, 0.0)?;
    let mut p = Placement::empty(inst.services.len());
    for (j, &s) in search.best_choice.iter().enumerate() {
        for &i in &search.subsets[j][s] {
            p.insert(i, j);
        }
    }
    let opt = spsc_reward(&p, inst).total;
    Ok((p, opt))
}
