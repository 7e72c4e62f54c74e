//! Sampling estimators for the randomized schemes behind SA1 and SA2.
//!
//! Trial `t` draws from a ChaCha8 stream `t` keyed by the seed, so results do
//! not depend on how rayon splits the work. Per-trial values are collected in
//! trial order and summed sequentially.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::lp::LpSolution;
use crate::model::SpscInstance;
use crate::sa2::{sa2_group_specs, Label, Sa2NodeData, LABELS};
use crate::slots::{PartialAllocation, SlotContext};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Neumaier-compensated sum; plain summation of 10⁵ equal values drifts by ~1e-11.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

impl McEstimate {
    fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = compensated_sum(values.iter().copied()) / n;
        let var = if values.len() > 1 {
            compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0)
        } else {
            0.0
        };
        McEstimate { mean, stderr: (var / n).sqrt() }
    }

    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn agrees(&self, value: f64, k: f64) -> bool {
        (value - self.mean).abs() <= k * self.stderr + 1e-12 * value.abs().max(1.0)
    }
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Index into `weights` drawn proportionally; `total` is their sum.
fn draw(rng: &mut ChaCha8Rng, weights: &[f64], total: f64) -> usize {
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (idx, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return idx;
        }
    }
    weights.len() - 1
}

fn reward_of(inst: &SpscInstance, hosted: &[bool], n_nodes: usize) -> f64 {
    inst.users.iter().filter(|u| u.node_set.iter().any(|&j| hosted[u.demand * n_nodes + j])).map(|u| u.weight).sum()
}

/// Estimates Ω(partial) by completing empty slots at random.
pub fn monte_carlo_sa1(ctx: &SlotContext, partial: &PartialAllocation, trials: u64, seed: u64) -> McEstimate {
    assert!(trials >= 1000, "at least 1000 trials are required");
    let n_nodes = ctx.inst.nodes.len();
    let weights: Vec<Vec<f64>> =
        ctx.groups.iter().map(|g| g.candidates.iter().map(|&i| ctx.sol.x(i, g.node)).collect()).collect();
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let mut hosted = vec![false; ctx.inst.services.len() * n_nodes];
            for (slot, a) in ctx.slots.iter().zip(&partial.assign) {
                let g = &ctx.groups[slot.group];
                let i = match a {
                    Some(i) => *i,
                    None => g.candidates[draw(&mut rng, &weights[slot.group], g.mass)],
                };
                hosted[i * n_nodes + slot.node] = true;
            }
            reward_of(ctx.inst, &hosted, n_nodes)
        })
        .collect();
    McEstimate::from_samples(&values)
}

/// Per node and label: `(candidates, weights, mass, n_slots)` for each slot group.
type NodeGroups = Vec<(Vec<usize>, Vec<f64>, f64, usize)>;

fn groups_by_label(data: &[Sa2NodeData], sol: &LpSolution) -> Vec<[NodeGroups; 3]> {
    data.iter()
        .map(|d| {
            LABELS.map(|l| {
                sa2_group_specs(std::slice::from_ref(d), &[l])
                    .into_iter()
                    .map(|spec| {
                        let w: Vec<f64> = spec.candidates.iter().map(|&i| sol.x(i, d.node)).collect();
                        let mass = w.iter().sum();
                        (spec.candidates, w, mass, spec.n_slots)
                    })
                    .collect()
            })
        })
        .collect()
}

fn label_index(l: Label) -> usize {
    LABELS.iter().position(|&x| x == l).expect("known label")
}

/// One two-stage draw: labels for unset nodes, then slot contents everywhere.
fn sample_sa2(
    rng: &mut ChaCha8Rng,
    data: &[Sa2NodeData],
    groups: &[[NodeGroups; 3]],
    labels: &[Option<Label>],
    hosted: &mut [bool],
    n_nodes: usize,
) {
    for (j, d) in data.iter().enumerate() {
        let label = match labels[j] {
            Some(l) => l,
            None => {
                let probs: Vec<f64> = LABELS.iter().map(|&l| d.label_probability(l).max(0.0)).collect();
                LABELS[draw(rng, &probs, probs.iter().sum())]
            }
        };
        for (cands, w, mass, n) in &groups[j][label_index(label)] {
            for _ in 0..*n {
                let i = cands[draw(rng, w, *mass)];
                hosted[i * n_nodes + j] = true;
            }
        }
    }
}

/// Estimates Ω̂₂(labels) with the two-stage sampler.
pub fn monte_carlo_sa2(
    inst: &SpscInstance,
    sol: &LpSolution,
    data: &[Sa2NodeData],
    labels: &[Option<Label>],
    trials: u64,
    seed: u64,
) -> McEstimate {
    assert!(trials >= 1000, "at least 1000 trials are required");
    let n_nodes = inst.nodes.len();
    let groups = groups_by_label(data, sol);
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let mut hosted = vec![false; inst.services.len() * n_nodes];
            sample_sa2(&mut rng, data, &groups, labels, &mut hosted, n_nodes);
            reward_of(inst, &hosted, n_nodes)
        })
        .collect();
    McEstimate::from_samples(&values)
}

/// Empirical probability that service `i` lands on node `j`, indexed `[i][j]`,
/// with every label drawn at random.
pub fn sa2_placement_frequencies(
    inst: &SpscInstance,
    sol: &LpSolution,
    data: &[Sa2NodeData],
    trials: u64,
    seed: u64,
) -> Vec<Vec<McEstimate>> {
    assert!(trials >= 1000, "at least 1000 trials are required");
    let n_nodes = inst.nodes.len();
    let n_services = inst.services.len();
    let groups = groups_by_label(data, sol);
    let unset = vec![None; n_nodes];
    let hits: Vec<Vec<bool>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let mut hosted = vec![false; n_services * n_nodes];
            sample_sa2(&mut rng, data, &groups, &unset, &mut hosted, n_nodes);
            hosted
        })
        .collect();
    let n = trials as f64;
    (0..n_services)
        .map(|i| {
            (0..n_nodes)
                .map(|j| {
                    let count = hits.iter().filter(|h| h[i * n_nodes + j]).count() as f64;
                    let p = count / n;
                    McEstimate { mean: p, stderr: (p * (1.0 - p) / (n - 1.0)).sqrt() }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Node, Service, SpscUser};
    use crate::sa2::{classify_sa2, expectation_sa2, single_node_probability};
    use crate::slots::{expectation, GroupSpec, Level};

    fn one_slot() -> (SpscInstance, LpSolution) {
        let inst = SpscInstance::new(
            vec![Service { size: 0.1 }, Service { size: 0.1 }],
            vec![Node { capacity: 1.0 }],
            vec![SpscUser { demand: 0, node_set: vec![0], weight: 2.0 }],
        )
        .unwrap();
        let sol = LpSolution::from_x(&inst, vec![0.5, 0.6]);
        (inst, sol)
    }

    #[test]
    fn sa1_sampler_matches_single_slot() {
        let (inst, sol) = one_slot();
        let spec = GroupSpec { node: 0, level: Level::Bracket(1), candidates: vec![0, 1], n_slots: 1 };
        let ctx = SlotContext::new(&inst, &sol, vec![spec]).unwrap();
        let partial = PartialAllocation::empty(&ctx);
        let est = monte_carlo_sa1(&ctx, &partial, 100_000, 11);
        assert!(est.agrees(expectation(&ctx, &partial).unwrap(), 3.0), "{est:?}");
        assert!((0.0..=2.0).contains(&est.mean));
        assert_eq!(est, monte_carlo_sa1(&ctx, &partial, 100_000, 11));
        let fixed = PartialAllocation { assign: vec![Some(0)] };
        let det = monte_carlo_sa1(&ctx, &fixed, 1000, 3);
        assert_eq!(det, McEstimate { mean: 2.0, stderr: 0.0 });
    }

    #[test]
    fn sa2_sampler_matches_mixture() {
        // HALF service x=0.4 with D_half=0.9 and BIG mass 0.8 on the node.
        let inst = SpscInstance::new(
            vec![Service { size: 0.4 }, Service { size: 0.3 }, Service { size: 0.7 }],
            vec![Node { capacity: 1.0 }],
            vec![SpscUser { demand: 0, node_set: vec![0], weight: 2.0 }],
        )
        .unwrap();
        let sol = LpSolution::from_x(&inst, vec![0.4, 0.5, 0.8]);
        let data = classify_sa2(&inst, &sol).unwrap();
        let b = single_node_probability(&data[0], &sol, &inst, 0, None);
        assert!((b - 0.155_555).abs() < 1e-6);
        let exact = expectation_sa2(&inst, &sol, &data, &[None]);
        assert!((exact - 0.311_111).abs() < 1e-6);
        let est = monte_carlo_sa2(&inst, &sol, &data, &[None], 100_000, 5);
        assert!(est.agrees(exact, 3.0), "{est:?} vs {exact}");
        let fixed = monte_carlo_sa2(&inst, &sol, &data, &[Some(Label::Small)], 1000, 5);
        assert_eq!(fixed.mean, 0.0);
    }

    #[test]
    fn constant_samples_have_exact_mean() {
        let est = McEstimate::from_samples(&vec![4.378_981_234_567; 100_000]);
        assert_eq!(est.mean, 4.378_981_234_567);
        assert_eq!(est.stderr, 0.0);
        assert!(est.agrees(4.378_981_234_567, 3.0));
    }

    #[test]
    fn shard_count_does_not_matter() {
        let (inst, sol) = one_slot();
        let spec = GroupSpec { node: 0, level: Level::Bracket(1), candidates: vec![0, 1], n_slots: 2 };
        let ctx = SlotContext::new(&inst, &sol, vec![spec]).unwrap();
        let partial = PartialAllocation::empty(&ctx);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| monte_carlo_sa1(&ctx, &partial, 5000, 9));
        let b = four.install(|| monte_carlo_sa1(&ctx, &partial, 5000, 9));
        assert_eq!(a, b);
    }
}
