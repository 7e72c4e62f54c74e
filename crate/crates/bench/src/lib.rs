//! Instances shared by the benchmarks.

use slotplace::simgen::{generate, GenParams};
use slotplace::{gsp_to_spsc, SpscInstance};

/// A generated instance converted to SPSC form.
pub fn bench_instance(n_services: usize, n_nodes: usize, n_users: usize, seed: u64) -> SpscInstance {
    let params = GenParams { n_services, n_nodes, n_users, seed: Some(seed), ..GenParams::default() };
    let g = generate(&params).expect("valid benchmark parameters");
    gsp_to_spsc(&g.instance).0
}
