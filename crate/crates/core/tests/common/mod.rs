//! Random instance builders for integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use slotplace::{GspInstance, GspUser, Node, Placement, Service, SpscInstance, SpscUser};

/// Rewards mix zeros, repeated values and continuous draws so ties are common.
pub fn random_gsp(rng: &mut ChaCha8Rng, max_services: usize, max_nodes: usize, max_users: usize) -> GspInstance {
    let ns = rng.gen_range(1..=max_services);
    let nn = rng.gen_range(1..=max_nodes);
    let nu = rng.gen_range(1..=max_users);
    let services = (0..ns).map(|_| Service { size: rng.gen_range(0.1..1.5) }).collect();
    let nodes = (0..nn).map(|_| Node { capacity: rng.gen_range(0.5..2.0) }).collect();
    let users = (0..nu)
        .map(|_| GspUser {
            demand: rng.gen_range(0..ns),
            rewards: (0..nn)
                .map(|_| match rng.gen_range(0..10) {
                    0..=2 => 0.0,
                    3 => 0.5,
                    4 => 1.0,
                    _ => rng.gen_range(0.01..1.0),
                })
                .collect(),
        })
        .collect();
    GspInstance::new(services, nodes, users).unwrap()
}

fn random_users(rng: &mut ChaCha8Rng, ns: usize, nn: usize, nu: usize) -> Vec<SpscUser> {
    (0..nu)
        .map(|_| {
            let mut set: Vec<usize> = (0..nn).filter(|_| rng.gen_bool(0.5)).collect();
            if set.is_empty() {
                set.push(rng.gen_range(0..nn));
            }
            SpscUser { demand: rng.gen_range(0..ns), node_set: set, weight: rng.gen_range(0.1..3.0) }
        })
        .collect()
}

/// Every service at most `beta` times the smallest capacity.
pub fn random_small_sizes(
    rng: &mut ChaCha8Rng,
    beta: f64,
    max_services: usize,
    max_nodes: usize,
    max_users: usize,
) -> SpscInstance {
    let ns = rng.gen_range(1..=max_services);
    let nn = rng.gen_range(1..=max_nodes);
    let nu = rng.gen_range(1..=max_users);
    let nodes: Vec<Node> = (0..nn).map(|_| Node { capacity: rng.gen_range(1.0..3.0) }).collect();
    let cmin = nodes.iter().map(|n| n.capacity).fold(f64::INFINITY, f64::min);
    let services = (0..ns).map(|_| Service { size: cmin * beta * rng.gen_range(0.05..=1.0) }).collect();
    let users = random_users(rng, ns, nn, nu);
    SpscInstance::new(services, nodes, users).unwrap()
}

/// Sizes spread over every class, including services that fit nowhere.
pub fn random_any_sizes(rng: &mut ChaCha8Rng, max_services: usize, max_nodes: usize, max_users: usize) -> SpscInstance {
    let ns = rng.gen_range(1..=max_services);
    let nn = rng.gen_range(1..=max_nodes);
    let nu = rng.gen_range(1..=max_users);
    let nodes = (0..nn).map(|_| Node { capacity: rng.gen_range(0.5..2.0) }).collect();
    let services = (0..ns)
        .map(|_| Service { size: if rng.gen_bool(0.3) { rng.gen_range(0.02..0.2) } else { rng.gen_range(0.2..2.2) } })
        .collect();
    let users = random_users(rng, ns, nn, nu);
    SpscInstance::new(services, nodes, users).unwrap()
}

/// Per node, services in random order, each kept with probability 1/2 if it fits.
pub fn random_feasible_placement(rng: &mut ChaCha8Rng, sizes: &[f64], capacities: &[f64]) -> Placement {
    let mut p = Placement::empty(sizes.len());
    for (j, &cap) in capacities.iter().enumerate() {
        let mut order: Vec<usize> = (0..sizes.len()).collect();
        order.shuffle(rng);
        let mut load = 0.0;
        for i in order {
            if rng.gen_bool(0.5) && load + sizes[i] <= cap {
                p.insert(i, j);
                load += sizes[i];
            }
        }
    }
    p
}
