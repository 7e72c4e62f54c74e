//! Small hand-built instances used by tests, the CLI and benchmarks.

use crate::model::{GspInstance, GspUser, Node, Service};

/// One unit-capacity node, one unit-size service worth 2 and `n` services of
/// size `1/n` worth 1 each. Greedy takes the big service (reward 2); the
/// optimum packs all small ones (reward `n`).
pub fn greedy_pathology(n: usize) -> GspInstance {
    assert!(n >= 1, "greedy_pathology needs n >= 1");
    let mut services = vec![Service { size: 1.0 }];
    services.extend((0..n).map(|_| Service { size: 1.0 / n as f64 }));
    let mut users = vec![GspUser { demand: 0, rewards: vec![2.0] }];
    users.extend((1..=n).map(|i| GspUser { demand: i, rewards: vec![1.0] }));
    GspInstance { services, nodes: vec![Node { capacity: 1.0 }], users }
}
