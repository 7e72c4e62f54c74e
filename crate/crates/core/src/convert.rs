//! GSP to SPSC conversion by telescoping sorted rewards.
//!
//! Each GSP user `l` with rewards sorted as `a(j_1) >= a(j_2) >= ...` becomes
//! restricted users `(l, b)` demanding the same service, with node set
//! `{j_1..j_b}` and weight `a(j_b) - a(j_{b+1})` (last one `a(j_last)`). A user
//! whose best hosting node is `j_b` is then satisfied exactly for ranks
//! `b..last`, whose weights telescope to `a(j_b)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{gsp_reward, spsc_reward, GspInstance, Placement, SpscInstance, SpscUser};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RestrictedOrigin {
    /// Index of the original GSP user.
    pub origin: usize,
    /// 1-based position in that user's node ordering.
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConversionMap {
    /// One entry per SPSC user, aligned with `SpscInstance::users`.
    pub restricted: Vec<RestrictedOrigin>,
    /// Per original user: nodes with positive reward, best first.
    pub orderings: Vec<Vec<usize>>,
}

impl ConversionMap {
    /// SPSC user indices produced from each original user.
    pub fn users_by_origin(&self, n_original: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n_original];
        for (k, r) in self.restricted.iter().enumerate() {
            out[r.origin].push(k);
        }
        out
    }
}

/// Nodes with positive reward, by reward descending then node id ascending.
fn ordering(rewards: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rewards.len()).filter(|&j| rewards[j] > 0.0).collect();
    order.sort_by(|&a, &b| rewards[b].total_cmp(&rewards[a]).then(a.cmp(&b)));
    order
}

pub fn gsp_to_spsc(inst: &GspInstance) -> (SpscInstance, ConversionMap) {
    let mut users = Vec::new();
    let mut restricted = Vec::new();
    let mut orderings = Vec::with_capacity(inst.users.len());
    for (l, user) in inst.users.iter().enumerate() {
        let order = ordering(&user.rewards);
        for b in 0..order.len() {
            let here = user.rewards[order[b]];
            let next = order.get(b + 1).map_or(0.0, |&j| user.rewards[j]);
            let weight = here - next;
            if weight > 0.0 {
                let mut node_set = order[..=b].to_vec();
                node_set.sort_unstable();
                users.push(SpscUser { demand: user.demand, node_set, weight });
                restricted.push(RestrictedOrigin { origin: l, rank: b + 1 });
            }
        }
        orderings.push(order);
    }
    let spsc = SpscInstance { services: inst.services.clone(), nodes: inst.nodes.clone(), users };
    (spsc, ConversionMap { restricted, orderings })
}

/// True iff the GSP and converted SPSC rewards of `p` agree within 1e-9.
pub fn verify_equivalence(gsp: &GspInstance, spsc: &SpscInstance, map: &ConversionMap, p: &Placement) -> Result<bool> {
    if gsp.services != spsc.services
        || gsp.nodes != spsc.nodes
        || map.restricted.len() != spsc.users.len()
        || map.orderings.len() != gsp.users.len()
    {
        return Err(Error::input("SPSC instance was not converted from this GSP instance"));
    }
    if p.n_services() != gsp.services.len() || p.pairs().any(|(_, j)| j >= gsp.nodes.len()) {
        return Err(Error::input("placement does not match the instance"));
    }
    Ok((gsp_reward(p, gsp) - spsc_reward(p, spsc).total).abs() <= 1e-9)
}
