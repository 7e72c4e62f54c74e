//! Pairwise greedy: repeatedly place the `(service, node)` pair with the
//! largest marginal reward among pairs that still fit.

use crate::model::{GspInstance, Placement, Resources, SpscInstance};

use super::fits;

/// Shared loop; `gains(i, placed)` returns the marginal gain of `i` on every node.
fn run<R: Resources>(inst: &R, mut gains: impl FnMut(usize, &Placement) -> Vec<f64>) -> Placement {
    let n_services = inst.services().len();
    let n_nodes = inst.nodes().len();
    let mut placed = Placement::empty(n_services);
    let mut load = vec![0.0; n_nodes];
    let mut gain: Vec<Vec<f64>> = (0..n_services).map(|i| gains(i, &placed)).collect();
    loop {
        let mut best: Option<(usize, usize)> = None;
        let mut best_gain = 0.0;
        for (i, row) in gain.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                if g > best_gain && !placed.hosts(i, j) && fits(load[j], inst.size(i), inst.capacity(j)) {
                    best = Some((i, j));
                    best_gain = g;
                }
            }
        }
        let Some((i, j)) = best else { break };
        placed.insert(i, j);
        load[j] += inst.size(i);
        gain[i] = gains(i, &placed);
    }
    placed
}

pub fn greedy(inst: &SpscInstance) -> Placement {
    let mut by_service = vec![Vec::new(); inst.services.len()];
    for (k, u) in inst.users.iter().enumerate() {
        by_service[u.demand].push(k);
    }
    let n_nodes = inst.nodes.len();
    run(inst, |i, placed| {
        let mut g = vec![0.0; n_nodes];
        for &k in &by_service[i] {
            let u = &inst.users[k];
            if !placed.serves(i, &u.node_set) {
                for &j in &u.node_set {
                    g[j] += u.weight;
                }
            }
        }
        g
    })
}

/// Same greedy on the GSP objective: a user gains the improvement over its current best node.
pub fn greedy_gsp(inst: &GspInstance) -> Placement {
    let mut by_service = vec![Vec::new(); inst.services.len()];
    for (k, u) in inst.users.iter().enumerate() {
        by_service[u.demand].push(k);
    }
    let n_nodes = inst.nodes.len();
    run(inst, |i, placed| {
        let mut g = vec![0.0; n_nodes];
        for &k in &by_service[i] {
            let u = &inst.users[k];
            let current = placed.nodes_of(i).iter().map(|&j| u.rewards[j]).fold(0.0, f64::max);
            for (j, gj) in g.iter_mut().enumerate() {
                *gj += (u.rewards[j] - current).max(0.0);
            }
        }
        g
    })
}
