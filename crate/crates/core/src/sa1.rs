//! Slot allocation for small services (every size at most `β` times every capacity).
//!
//! Services on node `j` are split into brackets
//! `P_{j,q} = {i : γ^q c_j β < s_i ≤ γ^{q-1} c_j β}` with `γ = 1 - √β`. Bracket
//! `q` gets `⌈v_j D_{j,q}⌉` slots, `v_j = δ c_j / Σ_i s_i x[i][j]`, `δ = γ²`.
//! Any filling of those slots fits on the node.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::LpSolution;
use crate::model::{Resources, SpscInstance};
use crate::slots::{derandomized_fill, group_mass, GroupSpec, Level, SlotContext};

/// Relative slack accepted on `size ≤ β·capacity`.
const BETA_SLACK: f64 = 1e-12;

/// Subtracted from `v·D` before rounding up, so products that are integers in
/// exact arithmetic do not gain a slot from rounding error.
pub(crate) const CEIL_GUARD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sa1Params {
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Sa1Params {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::input(format!("beta must lie in (0, 1), got {beta}")));
        }
        let gamma = 1.0 - beta.sqrt();
        Ok(Sa1Params { beta, gamma, delta: gamma * gamma })
    }

    /// `1 - e^{-δ}`.
    pub fn ratio(&self) -> f64 {
        1.0 - (-self.delta).exp()
    }
}

/// Bracket index `q ≥ 1` of a service of `size` on a node of `capacity`.
pub fn bracket_level(size: f64, capacity: f64, params: &Sa1Params) -> Result<u32> {
    let top = capacity * params.beta;
    if size.is_nan() || size <= 0.0 || size > top * (1.0 + BETA_SLACK) {
        return Err(Error::input(format!("size {size} exceeds beta {} times capacity {capacity}", params.beta)));
    }
    bracket_below(size, top, params.gamma)
}

/// Walks down from `top` by factors of `gamma`; the upper end of each bracket is inclusive.
pub(crate) fn bracket_below(size: f64, top: f64, gamma: f64) -> Result<u32> {
    let mut upper = top;
    let mut q = 1u32;
    loop {
        let lower = upper * gamma;
        if size > lower {
            return Ok(q);
        }
        if lower <= 0.0 || q == u32::MAX {
            return Err(Error::internal(format!("no bracket for size {size}")));
        }
        upper = lower;
        q += 1;
    }
}

/// `⌈v·D⌉` with the rounding guard.
pub(crate) fn slot_count(v: f64, mass: f64) -> usize {
    let target = v * mass - CEIL_GUARD;
    if target <= 0.0 {
        if mass > 0.0 {
            1
        } else {
            0
        }
    } else {
        target.ceil() as usize
    }
}

/// Bracket groups of one node for services in `members` (all with `x > 0`).
pub(crate) fn bracket_specs(
    inst: &SpscInstance,
    sol: &LpSolution,
    node: usize,
    members: &[usize],
    params: &Sa1Params,
    v: f64,
) -> Result<Vec<GroupSpec>> {
    let mut by_level: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for &i in members {
        let q = bracket_level(inst.size(i), inst.capacity(node), params)?;
        by_level.entry(q).or_default().push(i);
    }
    Ok(by_level
        .into_iter()
        .map(|(q, candidates)| {
            let n_slots = slot_count(v, group_mass(sol, node, &candidates));
            GroupSpec { node, level: Level::Bracket(q), candidates, n_slots }
        })
        .collect())
}

pub fn create_slots_sa1<'a>(
    inst: &'a SpscInstance,
    sol: &'a LpSolution,
    params: &Sa1Params,
) -> Result<SlotContext<'a>> {
    let mut specs = Vec::new();
    for j in 0..inst.nodes.len() {
        let support: Vec<usize> = (0..inst.services.len()).filter(|&i| sol.x(i, j) > 0.0).collect();
        let used: f64 = support.iter().map(|&i| inst.size(i) * sol.x(i, j)).sum();
        if support.is_empty() || used <= 0.0 {
            continue;
        }
        let v = params.delta * inst.capacity(j) / used;
        specs.extend(bracket_specs(inst, sol, j, &support, params, v)?);
    }
    SlotContext::new(inst, sol, specs)
}

/// Result of one slot-allocation run.
#[derive(Clone, Debug)]
pub struct SlotRun {
    pub placement: crate::model::Placement,
    pub reward: f64,
    pub n_slots: usize,
    /// Ω before the first slot decision and after each one.
    pub omega_trace: Vec<f64>,
}

pub fn run_sa1(inst: &SpscInstance, sol: &LpSolution, params: &Sa1Params) -> Result<SlotRun> {
    let ctx = create_slots_sa1(inst, sol, params)?;
    let out = derandomized_fill(&ctx);
    Ok(SlotRun { placement: out.placement, reward: out.reward, n_slots: ctx.n_slots(), omega_trace: out.omega_trace })
}
