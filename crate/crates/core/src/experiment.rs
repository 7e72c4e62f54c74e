//! Running algorithms on instances and parameter sweeps over generated instances.
//!
//! A sweep config is a flat `key = value` file; `#` starts a comment.
//!
//! ```text
//! vary = n_users            # generator parameter to sweep
//! values = 100, 200
//! seeds = 1, 2, 3           # one instance per (value, seed)
//! runs = 3                  # optional, must equal the number of seeds
//! algorithms = rsa, greedy, lp-round
//! n_services = 100          # any other generator parameter is held fixed
//! workers = 4               # optional, default: available parallelism
//! record_runtime = false    # optional; runtimes make reruns differ
//! ```
//!
//! The CSV has one `run` row per (value, seed, algorithm) and one `mean` row
//! per (value, algorithm), with the columns of [`ExperimentRecord`] in order.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{brute_force_optimal, greedy, lp_rounding, OracleBudget};
use crate::convert::{gsp_to_spsc, ConversionMap};
use crate::error::{Error, Result};
use crate::lp::{build_and_solve, LpOptions, LpSolution};
use crate::meta::{beta_min, csa, rsa, sa1_ratio, sa2_ratio, SubAlgorithm};
use crate::model::{
    check_feasible, gsp_reward, spsc_reward, AnyInstance, GspInstance, Placement, SpscInstance,
    DEFAULT_FEASIBILITY_TOLERANCE,
};
use crate::sa1::{run_sa1, Sa1Params};
use crate::sa2::run_sa2;
use crate::simgen::{generate, GenParams};

/// Slack allowed when checking `reward ≥ guarantee · R̂`.
pub const GUARANTEE_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Rsa,
    Csa,
    Sa1,
    Sa2,
    Greedy,
    LpRound,
    Brute,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Rsa,
        Algorithm::Csa,
        Algorithm::Sa1,
        Algorithm::Sa2,
        Algorithm::Greedy,
        Algorithm::LpRound,
        Algorithm::Brute,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rsa => "rsa",
            Algorithm::Csa => "csa",
            Algorithm::Sa1 => "sa1",
            Algorithm::Sa2 => "sa2",
            Algorithm::Greedy => "greedy",
            Algorithm::LpRound => "lp-round",
            Algorithm::Brute => "brute",
        }
    }

    /// Whether the algorithm carries an approximation guarantee.
    pub fn guaranteed(self) -> bool {
        matches!(self, Algorithm::Rsa | Algorithm::Csa | Algorithm::Sa1 | Algorithm::Sa2)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::input(format!("unknown algorithm {s:?}")))
    }
}

/// An instance in SPSC form plus what is needed to report on the original.
pub struct Prepared {
    pub spsc: SpscInstance,
    pub gsp: Option<(GspInstance, ConversionMap)>,
    pub lp: LpSolution,
}

impl Prepared {
    pub fn new(inst: AnyInstance) -> Result<Self> {
        let (spsc, gsp) = match inst {
            AnyInstance::Spsc(s) => (s, None),
            AnyInstance::Gsp(g) => {
                let (s, map) = gsp_to_spsc(&g);
                (s, Some((g, map)))
            }
        };
        let lp = build_and_solve(&spsc, &LpOptions::default())?;
        Ok(Prepared { spsc, gsp, lp })
    }

    /// Total reward and satisfied users, counted on the original instance.
    pub fn evaluate(&self, p: &Placement) -> (f64, usize, usize) {
        match &self.gsp {
            Some((g, _)) => {
                let satisfied =
                    g.users.iter().filter(|u| p.nodes_of(u.demand).iter().any(|&j| u.rewards[j] > 0.0)).count();
                (gsp_reward(p, g), satisfied, g.users.len())
            }
            None => {
                let r = spsc_reward(p, &self.spsc);
                (r.total, r.satisfied, self.spsc.users.len())
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Seed for `lp-round`.
    pub seed: u64,
    pub budget: OracleBudget,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunMetrics {
    pub algorithm: Algorithm,
    pub reward: f64,
    pub satisfied: usize,
    pub percent_satisfied: f64,
    pub r_hat: f64,
    pub guarantee: Option<f64>,
    /// `None` when the algorithm has no guarantee.
    pub guarantee_met: Option<bool>,
    pub rounds: Option<usize>,
    pub sub_algorithm: Option<String>,
    pub beta_min: Option<f64>,
    pub runtime_ms: f64,
    #[serde(skip)]
    pub placement: Placement,
}

pub fn run_algorithm(prep: &Prepared, alg: Algorithm, opts: &RunOptions) -> Result<RunMetrics> {
    let inst = &prep.spsc;
    let start = Instant::now();
    let mut rounds = None;
    let mut sub = None;
    let mut beta = beta_min(inst);
    let (placement, guarantee) = match alg {
        Algorithm::Rsa => {
            let report = rsa(inst)?;
            rounds = Some(report.rounds);
            sub = report.algorithm_per_round.first().map(|a| a.to_string());
            beta = report.beta_min;
            (report.placement, Some(report.guarantee))
        }
        Algorithm::Csa => {
            let out = csa(inst, &HashSet::new())?;
            sub = Some(out.algorithm.to_string());
            let g = out.guarantee();
            (out.run.placement, Some(g))
        }
        Algorithm::Sa1 => match beta {
            None => (Placement::empty(inst.services.len()), Some(sa2_ratio())),
            Some(b) if b >= 1.0 => {
                return Err(Error::input(format!(
                    "sa1 needs every service to be smaller than every node (beta_min = {b}); use sa2 or csa"
                )))
            }
            Some(b) => {
                let run = run_sa1(inst, &prep.lp, &Sa1Params::new(b)?)?;
                sub = Some(SubAlgorithm::Sa1.to_string());
                (run.placement, Some(sa1_ratio(b)))
            }
        },
        Algorithm::Sa2 => {
            sub = Some(SubAlgorithm::Sa2.to_string());
            (run_sa2(inst, &prep.lp)?.run.placement, Some(sa2_ratio()))
        }
        Algorithm::Greedy => (greedy(inst), None),
        Algorithm::LpRound => (lp_rounding(inst, &prep.lp, opts.seed), None),
        Algorithm::Brute => (brute_force_optimal(inst, &opts.budget)?.0, None),
    };
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    if !check_feasible(&placement, inst, DEFAULT_FEASIBILITY_TOLERANCE)? {
        return Err(Error::internal(format!("{alg} produced an infeasible placement")));
    }
    let (reward, satisfied, n_users) = prep.evaluate(&placement);
    let r_hat = prep.lp.r_hat;
    let guarantee_met = guarantee.map(|g| reward >= g * r_hat - GUARANTEE_SLACK);
    Ok(RunMetrics {
        algorithm: alg,
        reward,
        satisfied,
        percent_satisfied: if n_users == 0 { 0.0 } else { 100.0 * satisfied as f64 / n_users as f64 },
        r_hat,
        guarantee,
        guarantee_met,
        rounds,
        sub_algorithm: sub,
        beta_min: beta,
        runtime_ms,
        placement,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub vary: String,
    pub values: Vec<String>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub fixed: GenParams,
    pub workers: Option<usize>,
    pub record_runtime: bool,
}

fn list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut vary = None;
        let mut values = None;
        let mut seeds = None;
        let mut runs = None;
        let mut algorithms = None;
        let mut fixed = GenParams::default();
        let mut workers = None;
        let mut record_runtime = false;
        let mut seen = HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| Error::input(format!("line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::input(format!("line {}: duplicate key {key:?}", n + 1)));
            }
            let bad = |what: &str| Error::input(format!("line {}: bad {what} {value:?}", n + 1));
            match key {
                "vary" => vary = Some(value.to_string()),
                "values" => values = Some(list(value)),
                "seeds" => {
                    seeds = Some(
                        list(value)
                            .iter()
                            .map(|s| s.parse::<u64>().map_err(|_| bad("seed")))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "runs" => runs = Some(value.parse::<usize>().map_err(|_| bad("run count"))?),
                "algorithms" => {
                    algorithms = Some(list(value).iter().map(|s| s.parse()).collect::<Result<Vec<Algorithm>>>()?)
                }
                "workers" => workers = Some(value.parse::<usize>().map_err(|_| bad("worker count"))?),
                "record_runtime" => record_runtime = value.parse::<bool>().map_err(|_| bad("boolean"))?,
                _ => fixed.set(key, value)?,
            }
        }
        let vary = vary.ok_or_else(|| Error::input("missing key vary"))?;
        let values = values.ok_or_else(|| Error::input("missing key values"))?;
        let seeds = seeds.ok_or_else(|| Error::input("missing key seeds"))?;
        let algorithms = algorithms.ok_or_else(|| Error::input("missing key algorithms"))?;
        if vary == "seed" {
            return Err(Error::input("seeds are listed with the seeds key, not varied"));
        }
        if values.is_empty() || seeds.is_empty() || algorithms.is_empty() {
            return Err(Error::input("values, seeds and algorithms must be non-empty"));
        }
        if let Some(r) = runs {
            if r != seeds.len() {
                return Err(Error::input(format!("runs = {r} but {} seeds are listed", seeds.len())));
            }
        }
        if workers == Some(0) {
            return Err(Error::input("workers must be positive"));
        }
        // Reject unknown parameters and bad values before running anything.
        for v in &values {
            let mut p = fixed.clone();
            p.set(&vary, v)?;
            p.validate()?;
        }
        Ok(SweepConfig { vary, values, seeds, algorithms, fixed, workers, record_runtime })
    }
}

/// One CSV row. Column order is the field order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRecord {
    /// `run` or `mean`.
    pub row_type: String,
    pub param: String,
    pub value: String,
    pub seed: Option<u64>,
    pub algorithm: String,
    pub n_services: usize,
    pub n_nodes: usize,
    pub n_users: usize,
    pub kappa: f64,
    pub phi: f64,
    pub d: f64,
    pub reward: f64,
    pub percent_satisfied: f64,
    pub r_hat: f64,
    pub guarantee: Option<f64>,
    pub guarantee_met: Option<bool>,
    pub rounds: Option<f64>,
    pub sub_algorithm: Option<String>,
    pub runtime_ms: Option<f64>,
}

pub const CSV_HEADER: &str = "row_type,param,value,seed,algorithm,n_services,n_nodes,n_users,kappa,phi,d,\
reward,percent_satisfied,r_hat,guarantee,guarantee_met,rounds,sub_algorithm,runtime_ms";

fn run_cell(cfg: &SweepConfig, value: &str, seed: u64) -> Result<Vec<ExperimentRecord>> {
    let cell_err = |alg: &str, e: Error| Error::Cell {
        param: cfg.vary.clone(),
        value: value.to_string(),
        seed,
        algorithm: alg.to_string(),
        source: Box::new(e),
    };
    let mut params = cfg.fixed.clone();
    params.set(&cfg.vary, value).map_err(|e| cell_err("generate", e))?;
    params.seed = Some(seed);
    let generated = generate(&params).map_err(|e| cell_err("generate", e))?;
    let prep = Prepared::new(AnyInstance::Gsp(generated.instance)).map_err(|e| cell_err("lp", e))?;
    let opts = RunOptions { seed, budget: OracleBudget::default() };
    cfg.algorithms
        .iter()
        .map(|&alg| {
            let m = run_algorithm(&prep, alg, &opts).map_err(|e| cell_err(alg.name(), e))?;
            Ok(ExperimentRecord {
                row_type: "run".into(),
                param: cfg.vary.clone(),
                value: value.to_string(),
                seed: Some(seed),
                algorithm: alg.name().into(),
                n_services: params.n_services,
                n_nodes: params.n_nodes,
                n_users: params.n_users,
                kappa: params.kappa,
                phi: params.phi,
                d: params.d,
                reward: m.reward,
                percent_satisfied: m.percent_satisfied,
                r_hat: m.r_hat,
                guarantee: m.guarantee,
                guarantee_met: m.guarantee_met,
                rounds: m.rounds.map(|r| r as f64),
                sub_algorithm: m.sub_algorithm,
                runtime_ms: cfg.record_runtime.then_some(m.runtime_ms),
            })
        })
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_opt(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = xs.collect();
    v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// Runs every cell and returns run rows followed by mean rows for each value.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<ExperimentRecord>> {
    let cells: Vec<(usize, u64)> = (0..cfg.values.len()).flat_map(|v| cfg.seeds.iter().map(move |&s| (v, s))).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| Error::internal(format!("thread pool: {e}")))?;
    info!("sweep over {} = {:?}: {} cells", cfg.vary, cfg.values, cells.len());
    let results: Vec<Vec<ExperimentRecord>> = pool.install(|| {
        cells.par_iter().map(|&(v, seed)| run_cell(cfg, &cfg.values[v], seed)).collect::<Result<Vec<_>>>()
    })?;

    let mut out = Vec::new();
    for (v, value) in cfg.values.iter().enumerate() {
        let rows: Vec<&ExperimentRecord> =
            results.iter().zip(&cells).filter(|(_, c)| c.0 == v).flat_map(|(r, _)| r.iter()).collect();
        out.extend(rows.iter().map(|r| (*r).clone()));
        for alg in &cfg.algorithms {
            let group: Vec<&&ExperimentRecord> = rows.iter().filter(|r| r.algorithm == alg.name()).collect();
            let first = group[0];
            out.push(ExperimentRecord {
                row_type: "mean".into(),
                param: cfg.vary.clone(),
                value: value.clone(),
                seed: None,
                algorithm: alg.name().into(),
                reward: mean(group.iter().map(|r| r.reward)),
                percent_satisfied: mean(group.iter().map(|r| r.percent_satisfied)),
                r_hat: mean(group.iter().map(|r| r.r_hat)),
                guarantee: mean_opt(group.iter().map(|r| r.guarantee)),
                guarantee_met: group
                    .iter()
                    .map(|r| r.guarantee_met)
                    .collect::<Option<Vec<bool>>>()
                    .map(|v| v.iter().all(|&b| b)),
                rounds: mean_opt(group.iter().map(|r| r.rounds)),
                sub_algorithm: None,
                runtime_ms: mean_opt(group.iter().map(|r| r.runtime_ms)),
                ..(*first).clone()
            });
        }
    }
    Ok(out)
}

pub fn write_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
