//! Randomized rounding of the LP solution.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lp::LpSolution;
use crate::model::{Placement, Resources, SpscInstance};

use super::fits;

/// Per node, visits the services with LP mass in a random order and keeps
/// each with probability `x[i][j]` if it still fits.
pub fn lp_rounding(inst: &SpscInstance, sol: &LpSolution, seed: u64) -> Placement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placed = Placement::empty(inst.services.len());
    for j in 0..inst.nodes.len() {
        let mut order: Vec<usize> = (0..inst.services.len()).filter(|&i| sol.x(i, j) > 0.0).collect();
        order.shuffle(&mut rng);
        let mut load = 0.0;
        for i in order {
            let keep = rng.gen::<f64>() < sol.x(i, j);
            if keep && fits(load, inst.size(i), inst.capacity(j)) {
                placed.insert(i, j);
                load += inst.size(i);
            }
        }
    }
    placed
}
