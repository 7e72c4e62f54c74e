//! Algorithm selection (CSA) and the repeated solver (RSA).
//!
//! CSA picks SA1 with `β = β_min` when its ratio `1 - e^{-(1-√β)²}` beats the
//! SA2 ratio `(1 - e^{-1})/4`, and SA2 otherwise. RSA reruns CSA on the users
//! left unsatisfied, against the capacity left over, until a round adds
//! nothing.

use std::collections::HashSet;

use log::{debug, warn};
use serde::Serialize;

use crate::error::Result;
use crate::lp::{build_and_solve, LpOptions, LpSolution};
use crate::model::{spsc_reward, Node, Placement, Resources, SpscInstance};
use crate::sa1::{run_sa1, Sa1Params, SlotRun};
use crate::sa2::{self, run_sa2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SubAlgorithm {
    Sa1,
    Sa2,
}

impl std::fmt::Display for SubAlgorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SubAlgorithm::Sa1 => "sa1",
            SubAlgorithm::Sa2 => "sa2",
        })
    }
}

/// `1 - e^{-(1-√β)²}`.
pub fn sa1_ratio(beta: f64) -> f64 {
    let gamma = 1.0 - beta.sqrt();
    1.0 - (-gamma * gamma).exp()
}

pub fn sa2_ratio() -> f64 {
    sa2::ratio()
}

pub fn select_algorithm(beta: f64) -> SubAlgorithm {
    if beta >= 1.0 || sa2_ratio() > sa1_ratio(beta) {
        SubAlgorithm::Sa2
    } else {
        SubAlgorithm::Sa1
    }
}

/// Ratio guaranteed by CSA for a given `β_min`.
pub fn guarantee(beta: f64) -> f64 {
    if beta < 1.0 {
        sa1_ratio(beta).max(sa2_ratio())
    } else {
        sa2_ratio()
    }
}

/// The `β` at which both ratios coincide, `(1 - √(-ln(1 - ρ₂)))²`.
pub fn crossover_beta() -> f64 {
    let root = 1.0 - (-(1.0 - sa2_ratio()).ln()).sqrt();
    root * root
}

/// `max s / min c` over services demanded by some user that fit on some node,
/// and nodes large enough for the smallest of them. `None` if no such service.
pub fn beta_min(inst: &SpscInstance) -> Option<f64> {
    let cmax = inst.nodes.iter().map(|n| n.capacity).fold(0.0, f64::max);
    let mut demanded: Vec<usize> = inst.users.iter().map(|u| u.demand).collect();
    demanded.sort_unstable();
    demanded.dedup();
    let sizes: Vec<f64> = demanded.into_iter().map(|i| inst.size(i)).filter(|&s| s <= cmax).collect();
    let smin = sizes.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = sizes.iter().copied().fold(0.0, f64::max);
    let cmin = inst.nodes.iter().map(|n| n.capacity).filter(|&c| c >= smin).fold(f64::INFINITY, f64::min);
    (!sizes.is_empty()).then(|| smax / cmin)
}

#[derive(Clone, Debug)]
pub struct CsaOutcome {
    pub algorithm: SubAlgorithm,
    pub beta_min: Option<f64>,
    pub lp: LpSolution,
    pub run: SlotRun,
    /// Ω̂₂ trace when SA2 ran.
    pub label_trace: Vec<f64>,
}

impl CsaOutcome {
    pub fn guarantee(&self) -> f64 {
        self.beta_min.map_or(sa2_ratio(), guarantee)
    }
}

/// One CSA run; `forbidden` pairs get no LP mass.
pub fn csa(inst: &SpscInstance, forbidden: &HashSet<(usize, usize)>) -> Result<CsaOutcome> {
    let lp = build_and_solve(inst, &LpOptions { forbidden: forbidden.clone(), ..LpOptions::default() })?;
    let beta = beta_min(inst);
    let algorithm = beta.map_or(SubAlgorithm::Sa2, select_algorithm);
    debug!("CSA: beta_min {beta:?}, r_hat {}, running {algorithm}", lp.r_hat);
    let (run, label_trace) = match algorithm {
        SubAlgorithm::Sa1 => {
            let params = Sa1Params::new(beta.expect("SA1 is only selected with a beta"))?;
            (run_sa1(inst, &lp, &params)?, Vec::new())
        }
        SubAlgorithm::Sa2 => {
            let out = run_sa2(inst, &lp)?;
            (out.run, out.label_trace)
        }
    };
    Ok(CsaOutcome { algorithm, beta_min: beta, lp, run, label_trace })
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub placement: Placement,
    pub reward: f64,
    pub satisfied: usize,
    pub r_hat_per_round: Vec<f64>,
    pub algorithm_per_round: Vec<SubAlgorithm>,
    /// `β_min` of the first round.
    pub beta_min: Option<f64>,
    /// Rounds that added at least one placement.
    pub rounds: usize,
    /// Ratio guaranteed against the first-round LP bound.
    pub guarantee: f64,
    pub hit_round_cap: bool,
}

impl SolveReport {
    pub fn r_hat(&self) -> f64 {
        self.r_hat_per_round.first().copied().unwrap_or(0.0)
    }
}

/// Residual capacities are clamped to this so the sub-instance stays valid;
/// nothing fits on such a node.
const EXHAUSTED: f64 = f64::MIN_POSITIVE;

pub fn rsa(inst: &SpscInstance) -> Result<SolveReport> {
    inst.validate()?;
    let mut placed = Placement::empty(inst.services.len());
    let mut residual: Vec<f64> = inst.nodes.iter().map(|n| n.capacity).collect();
    let mut remaining: Vec<usize> = (0..inst.users.len()).collect();
    let mut report = SolveReport {
        placement: Placement::empty(0),
        reward: 0.0,
        satisfied: 0,
        r_hat_per_round: Vec::new(),
        algorithm_per_round: Vec::new(),
        beta_min: None,
        rounds: 0,
        guarantee: sa2_ratio(),
        hit_round_cap: false,
    };
    let cap = inst.users.len().max(1);
    let mut fixed_point = false;
    for round in 0..cap {
        if remaining.is_empty() {
            fixed_point = true;
            break;
        }
        let sub = SpscInstance {
            services: inst.services.clone(),
            nodes: residual.iter().map(|&c| Node { capacity: c.max(EXHAUSTED) }).collect(),
            users: remaining.iter().map(|&k| inst.users[k].clone()).collect(),
        };
        let forbidden: HashSet<(usize, usize)> = placed.pairs().collect();
        let out = csa(&sub, &forbidden)?;
        if round == 0 {
            report.beta_min = out.beta_min;
            report.guarantee = out.guarantee();
        }
        report.r_hat_per_round.push(out.lp.r_hat);
        report.algorithm_per_round.push(out.algorithm);

        let fresh: Vec<(usize, usize)> = out.run.placement.pairs().filter(|&(i, j)| !placed.hosts(i, j)).collect();
        if fresh.is_empty() {
            fixed_point = true;
            break;
        }
        for &(i, j) in &fresh {
            placed.insert(i, j);
            residual[j] -= inst.size(i);
        }
        report.rounds += 1;
        remaining.retain(|&k| !placed.serves(inst.users[k].demand, &inst.users[k].node_set));
        debug!("RSA round {}: {} new pairs, {} users left", round + 1, fresh.len(), remaining.len());
    }
    if !fixed_point && !remaining.is_empty() {
        warn!("RSA stopped after {cap} rounds without reaching a fixed point");
        report.hit_round_cap = true;
    }
    let r = spsc_reward(&placed, inst);
    report.reward = r.total;
    report.satisfied = r.satisfied;
    report.placement = placed;
    Ok(report)
}
