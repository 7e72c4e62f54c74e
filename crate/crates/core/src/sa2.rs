//! Slot allocation for arbitrary service sizes (β = 1/4).
//!
//! On node `j` services are BIG (`c/2 < s ≤ c`), HALF (`c/4 < s ≤ c/2`) or
//! fall in a geometric bracket below `c/4`. Each node gets one of three
//! labels: one BIG slot, two HALF slots, or the bracket slots of the small
//! services. Labels are fixed node by node with the conditional expectation
//! Ω̂₂, then the slots are filled by the shared derandomized filler.

use std::collections::BTreeMap;

use log::debug;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::LpSolution;
use crate::model::{Resources, SpscInstance};
use crate::sa1::{bracket_below, slot_count, SlotRun};
use crate::slots::{derandomized_fill, group_mass, GroupSpec, Level, SlotContext};

pub const BETA: f64 = 0.25;
pub const GAMMA: f64 = 0.5;
pub const DELTA: f64 = 0.25;

/// `(1 - e^{-1}) / 4`.
pub fn ratio() -> f64 {
    (1.0 - (-1.0f64).exp()) * DELTA
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum SizeClass {
    Big,
    Half,
    Bracket(u32),
}

/// Label of a node; the derived order is the tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Label {
    /// One BIG slot.
    Big,
    /// Two HALF slots.
    Half,
    /// Bracket slots for small services.
    Small,
}

pub const LABELS: [Label; 3] = [Label::Big, Label::Half, Label::Small];

/// Size class of `size` on a node of `capacity`; `None` if it does not fit.
pub fn size_class(size: f64, capacity: f64) -> Option<SizeClass> {
    if size > capacity || size <= 0.0 {
        None
    } else if size > capacity * 0.5 {
        Some(SizeClass::Big)
    } else if size > capacity * BETA {
        Some(SizeClass::Half)
    } else {
        bracket_below(size, capacity * BETA, GAMMA).ok().map(SizeClass::Bracket)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sa2NodeData {
    pub node: usize,
    /// Candidates with positive LP mass, ascending.
    pub big: Vec<usize>,
    pub half: Vec<usize>,
    pub brackets: BTreeMap<u32, Vec<usize>>,
    pub d_big: f64,
    pub d_half: f64,
    pub d_brackets: BTreeMap<u32, f64>,
    pub h: f64,
    /// `δc / Σ s x` over small services; `None` when that sum is zero.
    pub v: Option<f64>,
    pub n_brackets: BTreeMap<u32, usize>,
}

impl Sa2NodeData {
    pub fn label_probability(&self, label: Label) -> f64 {
        match label {
            Label::Big => DELTA * self.d_big,
            Label::Half => DELTA * self.h,
            Label::Small => 1.0 - DELTA * self.d_big - DELTA * self.h,
        }
    }
}

pub fn classify_sa2(inst: &SpscInstance, sol: &LpSolution) -> Result<Vec<Sa2NodeData>> {
    let mut out = Vec::with_capacity(inst.nodes.len());
    for j in 0..inst.nodes.len() {
        let c = inst.capacity(j);
        let mut big = Vec::new();
        let mut half = Vec::new();
        let mut brackets: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        let mut small_load = 0.0;
        for i in 0..inst.services.len() {
            if sol.x(i, j) <= 0.0 {
                continue;
            }
            match size_class(inst.size(i), c) {
                Some(SizeClass::Big) => big.push(i),
                Some(SizeClass::Half) => half.push(i),
                Some(SizeClass::Bracket(q)) => {
                    brackets.entry(q).or_default().push(i);
                    small_load += inst.size(i) * sol.x(i, j);
                }
                None => return Err(Error::internal(format!("service {i} has LP mass on node {j} but does not fit"))),
            }
        }
        let d_big = group_mass(sol, j, &big);
        let d_half = group_mass(sol, j, &half);
        let d_brackets: BTreeMap<u32, f64> = brackets.iter().map(|(&q, c)| (q, group_mass(sol, j, c))).collect();
        let h = if d_half < 2.0 { d_half } else { d_half / 2.0 };
        let v = (small_load > 0.0).then(|| DELTA * c / small_load);
        let n_brackets = d_brackets.iter().map(|(&q, &d)| (q, v.map_or(0, |v| slot_count(v, d)))).collect();
        let data = Sa2NodeData { node: j, big, half, brackets, d_big, d_half, d_brackets, h, v, n_brackets };
        let p3 = data.label_probability(Label::Small);
        if p3 < DELTA - 1e-9 {
            return Err(Error::internal(format!("node {j}: label-3 probability {p3} below delta")));
        }
        out.push(data);
    }
    Ok(out)
}

/// Probability that node `j` ends up hosting service `i` given its label
/// (`None` marginalizes over the label distribution).
pub fn single_node_probability(
    data: &Sa2NodeData,
    sol: &LpSolution,
    inst: &SpscInstance,
    service: usize,
    label: Option<Label>,
) -> f64 {
    let j = data.node;
    let x = sol.x(service, j);
    if x <= 0.0 {
        return 0.0;
    }
    let class = size_class(inst.size(service), inst.capacity(j));
    let b = |l: Label| -> f64 {
        match (l, class) {
            (Label::Big, Some(SizeClass::Big)) => x / data.d_big,
            (Label::Half, Some(SizeClass::Half)) => {
                let r = 1.0 - x / data.d_half;
                1.0 - r * r
            }
            (Label::Small, Some(SizeClass::Bracket(q))) => {
                let n = data.n_brackets.get(&q).copied().unwrap_or(0);
                let r = 1.0 - x / data.d_brackets[&q];
                1.0 - r.powi(n as i32)
            }
            _ => 0.0,
        }
    };
    match label {
        Some(l) => b(l),
        None => LABELS.iter().map(|&l| data.label_probability(l) * b(l)).sum(),
    }
}

/// Ω̂₂: expected reward given a partial labeling, slot contents still random.
pub fn expectation_sa2(inst: &SpscInstance, sol: &LpSolution, data: &[Sa2NodeData], labels: &[Option<Label>]) -> f64 {
    inst.users
        .iter()
        .map(|u| {
            let mut p = 1.0;
            for &j in &u.node_set {
                p *= 1.0 - single_node_probability(&data[j], sol, inst, u.demand, labels[j]);
            }
            u.weight * (1.0 - p)
        })
        .sum()
}

#[derive(Clone, Debug)]
pub struct Labeling {
    pub labels: Vec<Label>,
    /// Ω̂₂ before the first decision and after each one.
    pub trace: Vec<f64>,
}

/// Fixes labels in ascending node order, each maximizing Ω̂₂.
pub fn label_nodes(inst: &SpscInstance, sol: &LpSolution, data: &[Sa2NodeData]) -> Labeling {
    let mut partial: Vec<Option<Label>> = vec![None; data.len()];
    let mut trace = vec![expectation_sa2(inst, sol, data, &partial)];
    for j in 0..data.len() {
        let mut best = (Label::Big, f64::NEG_INFINITY);
        for l in LABELS {
            partial[j] = Some(l);
            let value = expectation_sa2(inst, sol, data, &partial);
            if value > best.1 {
                best = (l, value);
            }
        }
        partial[j] = Some(best.0);
        trace.push(best.1);
    }
    Labeling { labels: partial.into_iter().map(|l| l.expect("every node labeled")).collect(), trace }
}

/// Slot groups for a complete labeling; classes without LP mass get no slots.
pub fn sa2_group_specs(data: &[Sa2NodeData], labels: &[Label]) -> Vec<GroupSpec> {
    let mut specs = Vec::new();
    for (d, &label) in data.iter().zip(labels) {
        match label {
            Label::Big if d.d_big > 0.0 => {
                specs.push(GroupSpec { node: d.node, level: Level::Big, candidates: d.big.clone(), n_slots: 1 })
            }
            Label::Half if d.d_half > 0.0 => {
                specs.push(GroupSpec { node: d.node, level: Level::Half, candidates: d.half.clone(), n_slots: 2 })
            }
            Label::Small => {
                for (&q, cands) in &d.brackets {
                    let n = d.n_brackets[&q];
                    if n > 0 && d.d_brackets[&q] > 0.0 {
                        specs.push(GroupSpec {
                            node: d.node,
                            level: Level::Bracket(q),
                            candidates: cands.clone(),
                            n_slots: n,
                        });
                    }
                }
            }
            _ => {}
        }
    }
    specs
}

pub fn create_slots_sa2<'a>(
    inst: &'a SpscInstance,
    sol: &'a LpSolution,
    data: &[Sa2NodeData],
    labels: &[Label],
) -> Result<SlotContext<'a>> {
    SlotContext::new(inst, sol, sa2_group_specs(data, labels))
}

#[derive(Clone, Debug)]
pub struct Sa2Run {
    pub run: SlotRun,
    pub labels: Vec<Label>,
    pub label_trace: Vec<f64>,
}

pub fn run_sa2(inst: &SpscInstance, sol: &LpSolution) -> Result<Sa2Run> {
    let data = classify_sa2(inst, sol)?;
    let labeling = label_nodes(inst, sol, &data);
    debug!("SA2 labels {:?}", labeling.labels);
    let ctx = create_slots_sa2(inst, sol, &data, &labeling.labels)?;
    let out = derandomized_fill(&ctx);
    Ok(Sa2Run {
        run: SlotRun {
            placement: out.placement,
            reward: out.reward,
            n_slots: ctx.n_slots(),
            omega_trace: out.omega_trace,
        },
        labels: labeling.labels,
        label_trace: labeling.trace,
    })
}
