//! Slots, the conditional expectation Ω and the derandomized filler.
//!
//! A slot is a compartment on a node tagged with a level. All slots of one
//! `(node, level)` form a group that shares a candidate set `P` and its LP mass
//! `D = Σ_{i∈P} x[i][node]`. In the randomized scheme every slot independently
//! holds candidate `i` with probability `x[i][node] / D`. Ω of a partial
//! allocation is the expected SPSC reward over its random completions.
//!
//! Slots are visited in `(node, level, ordinal)` order with levels ordered
//! `Bracket(1) < Bracket(2) < ... < Big < Half`.

use log::trace;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::LpSolution;
use crate::model::{Placement, SpscInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Level {
    /// Geometric size bracket, starting at 1.
    Bracket(u32),
    /// Services larger than half the capacity.
    Big,
    /// Services in `(βc, c/2]`.
    Half,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Slot {
    pub node: usize,
    pub level: Level,
    /// Index into [`SlotContext::groups`].
    pub group: usize,
}

/// Description of a slot group handed to [`SlotContext::new`].
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSpec {
    pub node: usize,
    pub level: Level,
    pub candidates: Vec<usize>,
    pub n_slots: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotGroup {
    pub node: usize,
    pub level: Level,
    /// Candidates with positive LP mass on this node, ascending.
    pub candidates: Vec<usize>,
    pub mass: f64,
    pub n_slots: usize,
}

/// `D = Σ x[i][node]` over `candidates`, summed in ascending service order.
pub fn group_mass(sol: &LpSolution, node: usize, candidates: &[usize]) -> f64 {
    candidates.iter().map(|&i| sol.x(i, node)).sum()
}

pub struct SlotContext<'a> {
    pub inst: &'a SpscInstance,
    pub sol: &'a LpSolution,
    pub groups: Vec<SlotGroup>,
    pub slots: Vec<Slot>,
    /// Per user: `(group, x/D)` for groups on its node set that list its service, in group order.
    touches: Vec<Vec<(usize, f64)>>,
    /// Per group: users that touch it, ascending.
    affected: Vec<Vec<usize>>,
}

impl<'a> SlotContext<'a> {
    /// Builds the context. Candidates without LP mass are dropped and groups
    /// without slots are discarded.
    pub fn new(inst: &'a SpscInstance, sol: &'a LpSolution, specs: Vec<GroupSpec>) -> Result<Self> {
        let mut groups: Vec<SlotGroup> = Vec::new();
        for spec in specs {
            if spec.n_slots == 0 {
                continue;
            }
            let mut candidates: Vec<usize> =
                spec.candidates.into_iter().filter(|&i| sol.x(i, spec.node) > 0.0).collect();
            candidates.sort_unstable();
            candidates.dedup();
            let mass = group_mass(sol, spec.node, &candidates);
            if mass <= 0.0 {
                return Err(Error::internal(format!(
                    "slot group on node {} level {:?} has no LP mass",
                    spec.node, spec.level
                )));
            }
            groups.push(SlotGroup { node: spec.node, level: spec.level, candidates, mass, n_slots: spec.n_slots });
        }
        groups.sort_by_key(|g| (g.node, g.level));
        if groups.windows(2).any(|w| (w[0].node, w[0].level) == (w[1].node, w[1].level)) {
            return Err(Error::internal("duplicate slot group"));
        }

        let slots = groups
            .iter()
            .enumerate()
            .flat_map(|(g, grp)| (0..grp.n_slots).map(move |_| Slot { node: grp.node, level: grp.level, group: g }))
            .collect();

        let mut touches = vec![Vec::new(); inst.users.len()];
        let mut affected = vec![Vec::new(); groups.len()];
        for (k, u) in inst.users.iter().enumerate() {
            for (g, grp) in groups.iter().enumerate() {
                if u.node_set.binary_search(&grp.node).is_ok() && grp.candidates.binary_search(&u.demand).is_ok() {
                    touches[k].push((g, sol.x(u.demand, grp.node) / grp.mass));
                    affected[g].push(k);
                }
            }
        }
        Ok(SlotContext { inst, sol, groups, slots, touches, affected })
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    /// Probability that a slot of group `g` holds `service`.
    pub fn probability(&self, g: usize, service: usize) -> f64 {
        let grp = &self.groups[g];
        if grp.candidates.binary_search(&service).is_ok() {
            self.sol.x(service, grp.node) / grp.mass
        } else {
            0.0
        }
    }

    /// Placement induced by the assigned slots.
    pub fn placement(&self, alloc: &PartialAllocation) -> Placement {
        let mut p = Placement::empty(self.inst.services.len());
        for (slot, a) in self.slots.iter().zip(&alloc.assign) {
            if let Some(i) = a {
                p.insert(*i, slot.node);
            }
        }
        p
    }

    /// Survival probability of an uncovered user given empty-slot counts per group.
    fn survival(&self, k: usize, empty: &[usize]) -> f64 {
        let mut s = 1.0;
        for &(g, r) in &self.touches[k] {
            for _ in 0..empty[g] {
                s *= 1.0 - r;
            }
        }
        s
    }

    fn check(&self, alloc: &PartialAllocation) -> Result<()> {
        if alloc.assign.len() != self.slots.len() {
            return Err(Error::internal("allocation does not match the slot list"));
        }
        for (slot, a) in self.slots.iter().zip(&alloc.assign) {
            if let Some(i) = a {
                if self.groups[slot.group].candidates.binary_search(i).is_err() {
                    return Err(Error::internal(format!("service {i} is not a candidate of its slot")));
                }
            }
        }
        Ok(())
    }
}

/// Service per slot, `None` for an empty slot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartialAllocation {
    pub assign: Vec<Option<usize>>,
}

impl PartialAllocation {
    pub fn empty(ctx: &SlotContext) -> Self {
        PartialAllocation { assign: vec![None; ctx.n_slots()] }
    }

    pub fn is_total(&self) -> bool {
        self.assign.iter().all(Option::is_some)
    }
}

/// Whether user `k` is served by a slot of `alloc`.
pub fn satisfaction(ctx: &SlotContext, alloc: &PartialAllocation, k: usize) -> bool {
    let u = &ctx.inst.users[k];
    ctx.slots
        .iter()
        .zip(&alloc.assign)
        .any(|(slot, a)| *a == Some(u.demand) && u.node_set.binary_search(&slot.node).is_ok())
}

/// Expected SPSC reward over random completions of `partial`.
pub fn expectation(ctx: &SlotContext, partial: &PartialAllocation) -> Result<f64> {
    ctx.check(partial)?;
    let mut total = 0.0;
    for (k, u) in ctx.inst.users.iter().enumerate() {
        let p = if satisfaction(ctx, partial, k) {
            1.0
        } else {
            let mut s = 1.0;
            for (slot, a) in ctx.slots.iter().zip(&partial.assign) {
                if a.is_none() && u.node_set.binary_search(&slot.node).is_ok() {
                    let grp = &ctx.groups[slot.group];
                    if grp.candidates.binary_search(&u.demand).is_ok() {
                        s *= 1.0 - ctx.sol.x(u.demand, slot.node) / grp.mass;
                    }
                }
            }
            1.0 - s
        };
        total += u.weight * p;
    }
    Ok(total)
}

#[derive(Clone, Debug)]
pub struct FillOutcome {
    pub allocation: PartialAllocation,
    pub placement: Placement,
    pub reward: f64,
    /// Ω before the first decision and after each one.
    pub omega_trace: Vec<f64>,
}

/// Fills every slot in order with the candidate maximizing Ω of the extended
/// allocation, ties going to the lowest service id.
///
/// Only users touching the current slot's group are rescored. For candidate
/// `i` the change in Ω differs from the other candidates only through users
/// demanding `i`, each adding `w_k · s_k⁻` where `s_k⁻` is its survival with
/// one fewer empty slot in the group.
pub fn derandomized_fill(ctx: &SlotContext) -> FillOutcome {
    let users = &ctx.inst.users;
    let mut empty: Vec<usize> = ctx.groups.iter().map(|g| g.n_slots).collect();
    let mut covered = vec![false; users.len()];
    let mut surv: Vec<f64> = (0..users.len()).map(|k| ctx.survival(k, &empty)).collect();
    let omega = |covered: &[bool], surv: &[f64]| -> f64 {
        users.iter().enumerate().map(|(k, u)| if covered[k] { u.weight } else { u.weight * (1.0 - surv[k]) }).sum()
    };

    let mut alloc = PartialAllocation { assign: vec![None; ctx.n_slots()] };
    let mut trace_vals = vec![omega(&covered, &surv)];
    let mut reduced: Vec<(usize, f64)> = Vec::new();
    for (idx, slot) in ctx.slots.iter().enumerate() {
        let g = slot.group;
        let grp = &ctx.groups[g];
        empty[g] -= 1;
        reduced.clear();
        reduced.extend(ctx.affected[g].iter().filter(|&&k| !covered[k]).map(|&k| (k, ctx.survival(k, &empty))));

        let mut best = grp.candidates[0];
        let mut best_score = f64::NEG_INFINITY;
        for &i in &grp.candidates {
            let score: f64 =
                reduced.iter().filter(|(k, _)| users[*k].demand == i).map(|&(k, s)| users[k].weight * s).sum();
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        alloc.assign[idx] = Some(best);
        for &(k, s) in &reduced {
            if users[k].demand == best {
                covered[k] = true;
            } else {
                surv[k] = s;
            }
        }
        trace_vals.push(omega(&covered, &surv));
        trace!("slot {idx} on node {} {:?} <- service {best}", slot.node, slot.level);
    }
    let placement = ctx.placement(&alloc);
    let reward = *trace_vals.last().expect("trace is never empty");
    FillOutcome { allocation: alloc, placement, reward, omega_trace: trace_vals }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{spsc_reward, Node, Service, SpscUser};
    use proptest::prelude::*;

    pub(crate) fn inst(services: usize, caps: &[f64], users: Vec<(usize, Vec<usize>, f64)>) -> SpscInstance {
        SpscInstance::new(
            vec![Service { size: 0.1 }; services],
            caps.iter().map(|&capacity| Node { capacity }).collect(),
            users.into_iter().map(|(demand, node_set, weight)| SpscUser { demand, node_set, weight }).collect(),
        )
        .unwrap()
    }

    fn spec(node: usize, level: Level, candidates: Vec<usize>, n_slots: usize) -> GroupSpec {
        GroupSpec { node, level, candidates, n_slots }
    }

    #[test]
    fn single_empty_slot_expectation() {
        let inst = inst(2, &[1.0], vec![(0, vec![0], 2.0)]);
        let sol = LpSolution::from_x(&inst, vec![0.5, 0.6]);
        let ctx = SlotContext::new(&inst, &sol, vec![spec(0, Level::Bracket(1), vec![0, 1], 1)]).unwrap();
        let omega = expectation(&ctx, &PartialAllocation::empty(&ctx)).unwrap();
        assert!((omega - 2.0 * 0.5 / 1.1).abs() < 1e-15);
        assert!((omega - 0.909_090_909_09).abs() < 1e-9);
    }

    #[test]
    fn covered_user_contributes_full_weight() {
        let inst = inst(2, &[1.0], vec![(0, vec![0], 2.0)]);
        let sol = LpSolution::from_x(&inst, vec![0.5, 0.6]);
        let ctx = SlotContext::new(&inst, &sol, vec![spec(0, Level::Bracket(1), vec![0, 1], 2)]).unwrap();
        let partial = PartialAllocation { assign: vec![Some(0), None] };
        assert_eq!(expectation(&ctx, &partial).unwrap(), 2.0);
    }

    #[test]
    fn satisfaction_cases() {
        let inst = inst(2, &[1.0, 1.0], vec![(0, vec![0], 1.0)]);
        let sol = LpSolution::from_x(&inst, vec![0.5, 0.5, 0.5, 0.5]);
        let none = SlotContext::new(&inst, &sol, vec![]).unwrap();
        assert!(!satisfaction(&none, &PartialAllocation::empty(&none), 0));
        let ctx = SlotContext::new(
            &inst,
            &sol,
            vec![spec(0, Level::Bracket(1), vec![0, 1], 1), spec(1, Level::Bracket(1), vec![0, 1], 1)],
        )
        .unwrap();
        assert!(satisfaction(&ctx, &PartialAllocation { assign: vec![Some(0), Some(1)] }, 0));
        assert!(!satisfaction(&ctx, &PartialAllocation { assign: vec![Some(1), Some(0)] }, 0));
    }

    #[test]
    fn fill_picks_dominant_service() {
        let inst = inst(2, &[1.0], vec![(0, vec![0], 3.0), (1, vec![0], 1.0)]);
        let sol = LpSolution::from_x(&inst, vec![0.5, 0.5]);
        let ctx = SlotContext::new(&inst, &sol, vec![spec(0, Level::Bracket(1), vec![0, 1], 1)]).unwrap();
        let out = derandomized_fill(&ctx);
        assert_eq!(out.allocation.assign, vec![Some(0)]);
        assert_eq!(out.reward, 3.0);
    }

    #[test]
    fn fill_without_slots_is_empty() {
        let inst = inst(1, &[1.0], vec![(0, vec![0], 3.0)]);
        let sol = LpSolution::from_x(&inst, vec![0.0]);
        let ctx = SlotContext::new(&inst, &sol, vec![]).unwrap();
        let out = derandomized_fill(&ctx);
        assert!(out.placement.is_empty());
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.omega_trace, vec![0.0]);
    }

    #[test]
    fn massless_group_is_rejected() {
        let inst = inst(1, &[1.0], vec![]);
        let sol = LpSolution::from_x(&inst, vec![0.0]);
        assert!(SlotContext::new(&inst, &sol, vec![spec(0, Level::Big, vec![0], 1)]).is_err());
    }

    #[test]
    fn slot_order_follows_node_then_level() {
        let inst = inst(3, &[1.0, 1.0], vec![]);
        let sol = LpSolution::from_x(&inst, vec![0.2; 6]);
        let ctx = SlotContext::new(
            &inst,
            &sol,
            vec![
                spec(1, Level::Bracket(1), vec![0], 1),
                spec(0, Level::Half, vec![1], 2),
                spec(0, Level::Big, vec![2], 1),
                spec(0, Level::Bracket(2), vec![0], 1),
            ],
        )
        .unwrap();
        let order: Vec<(usize, Level)> = ctx.slots.iter().map(|s| (s.node, s.level)).collect();
        assert_eq!(
            order,
            vec![(0, Level::Bracket(2)), (0, Level::Big), (0, Level::Half), (0, Level::Half), (1, Level::Bracket(1)),]
        );
    }

    /// Random context with every service assigned to one group per node.
    pub(crate) fn arb_context() -> impl Strategy<Value = (SpscInstance, LpSolution, Vec<GroupSpec>)> {
        (1usize..5, 1usize..4).prop_flat_map(|(ns, nn)| {
            let users = prop::collection::vec((0..ns, prop::collection::btree_set(0..nn, 1..=nn), 0.1f64..5.0), 1..8);
            let x = prop::collection::vec(prop_oneof![Just(0.0), 0.05f64..1.0], ns * nn);
            let levels = prop::collection::vec(0u32..3, ns * nn);
            let counts = prop::collection::vec(1usize..4, nn * 3);
            (users, x, levels, counts).prop_map(move |(users, x, levels, counts)| {
                let inst = inst(
                    ns,
                    &vec![1.0; nn],
                    users.into_iter().map(|(d, s, w)| (d, s.into_iter().collect(), w)).collect(),
                );
                let sol = LpSolution::from_x(&inst, x);
                let mut specs = Vec::new();
                for j in 0..nn {
                    for q in 0..3u32 {
                        let cands: Vec<usize> =
                            (0..ns).filter(|&i| levels[i * nn + j] == q && sol.x(i, j) > 0.0).collect();
                        if !cands.is_empty() {
                            specs.push(spec(j, Level::Bracket(q + 1), cands, counts[j * 3 + q as usize]));
                        }
                    }
                }
                (inst, sol, specs)
            })
        })
    }

    /// Reference filler: recompute Ω from scratch for every candidate.
    fn naive_fill(ctx: &SlotContext) -> (PartialAllocation, Vec<f64>) {
        let mut alloc = PartialAllocation::empty(ctx);
        let mut trace_vals = vec![expectation(ctx, &alloc).unwrap()];
        for idx in 0..ctx.n_slots() {
            let mut best = None;
            let mut best_val = f64::NEG_INFINITY;
            for &i in &ctx.groups[ctx.slots[idx].group].candidates {
                alloc.assign[idx] = Some(i);
                let v = expectation(ctx, &alloc).unwrap();
                if v > best_val {
                    best_val = v;
                    best = Some(i);
                }
            }
            alloc.assign[idx] = best;
            trace_vals.push(best_val);
        }
        (alloc, trace_vals)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn partition_identity((inst, sol, specs) in arb_context(), cut in 0usize..20, pick in any::<prop::sample::Index>()) {
            let ctx = SlotContext::new(&inst, &sol, specs).unwrap();
            prop_assume!(ctx.n_slots() > 0);
            let out = derandomized_fill(&ctx);
            let mut partial = out.allocation.clone();
            for a in partial.assign.iter_mut().skip(cut.min(ctx.n_slots())) { *a = None; }
            let empties: Vec<usize> = (0..ctx.n_slots()).filter(|&s| partial.assign[s].is_none()).collect();
            prop_assume!(!empties.is_empty());
            let sigma = empties[pick.index(empties.len())];
            let g = ctx.slots[sigma].group;
            let base = expectation(&ctx, &partial).unwrap();
            let mut mixed = 0.0;
            for &i in &ctx.groups[g].candidates {
                let mut ext = partial.clone();
                ext.assign[sigma] = Some(i);
                mixed += ctx.probability(g, i) * expectation(&ctx, &ext).unwrap();
            }
            prop_assert!((mixed - base).abs() <= 1e-9 * base.max(1.0), "mixed {} base {}", mixed, base);
        }

        #[test]
        fn incremental_fill_matches_recomputation((inst, sol, specs) in arb_context()) {
            let ctx = SlotContext::new(&inst, &sol, specs).unwrap();
            let out = derandomized_fill(&ctx);
            let (alloc, naive_trace) = naive_fill(&ctx);
            prop_assert_eq!(&out.allocation, &alloc);
            prop_assert_eq!(out.omega_trace.len(), naive_trace.len());
            // The trace of the filler equals Ω recomputed from scratch.
            let mut partial = PartialAllocation::empty(&ctx);
            prop_assert_eq!(out.omega_trace[0], expectation(&ctx, &partial).unwrap());
            for idx in 0..ctx.n_slots() {
                partial.assign[idx] = out.allocation.assign[idx];
                prop_assert_eq!(out.omega_trace[idx + 1], expectation(&ctx, &partial).unwrap());
            }
            for w in out.omega_trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12 * w[0].max(1.0));
            }
            prop_assert!(out.allocation.is_total());
            prop_assert_eq!(out.reward, spsc_reward(&out.placement, &inst).total);
        }
    }
}
