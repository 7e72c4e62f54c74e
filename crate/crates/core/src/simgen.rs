//! Synthetic GSP instances.
//!
//! * demand: Zipf(κ) over service ranks, sampled by inverse CDF;
//! * size: `φ (1 + Z_s / 14.13)`, `Z_s ~ Exp(0.12)`;
//! * capacity: uniform over {4, 8, 16, 32};
//! * platforms: each node flips a fair coin for platform A or B; each service
//!   runs on A only, B only or both with probability 1/3 each;
//! * reward: 0 on incompatible nodes, else `Z_u + Z_n` with `Z_u ~ U[0.01, 1]`
//!   per user and `Z_n ~ U[-d, d]` per node, both redrawn for that entry until
//!   the sum lies in `[0.01, 1]`.
//!
//! Draw order from one ChaCha8 stream: service sizes, service platforms, node
//! capacities, node platforms, then per user its demand, `Z_u` and the
//! per-node terms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GspInstance, GspUser, Node, Service};

const CAPACITIES: [f64; 4] = [4.0, 8.0, 16.0, 32.0];
const SIZE_RATE: f64 = 0.12;
const SIZE_DIVISOR: f64 = 14.13;
const REWARD_MIN: f64 = 0.01;
const REWARD_MAX: f64 = 1.0;
const MAX_RESAMPLES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    pub n_services: usize,
    pub n_nodes: usize,
    pub n_users: usize,
    pub kappa: f64,
    pub phi: f64,
    pub d: f64,
    pub seed: Option<u64>,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { n_services: 1000, n_nodes: 10, n_users: 1000, kappa: 1.3, phi: 1.0, d: 0.0, seed: None }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_services == 0 || self.n_nodes == 0 {
            return Err(Error::input("need at least one service and one node"));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::input(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return Err(Error::input(format!("phi must be positive, got {}", self.phi)));
        }
        if !(self.d >= 0.0 && self.d.is_finite()) {
            return Err(Error::input(format!("d must be non-negative, got {}", self.d)));
        }
        Ok(())
    }

    /// Sets a parameter from its name, as used by sweep configs and the CLI.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: &dyn std::fmt::Display| Error::input(format!("bad value {value:?} for {key}: {e}"));
        match key {
            "n_services" | "services" => self.n_services = value.parse().map_err(|e| bad(&e))?,
            "n_nodes" | "nodes" => self.n_nodes = value.parse().map_err(|e| bad(&e))?,
            "n_users" | "users" => self.n_users = value.parse().map_err(|e| bad(&e))?,
            "kappa" => self.kappa = value.parse().map_err(|e| bad(&e))?,
            "phi" => self.phi = value.parse().map_err(|e| bad(&e))?,
            "d" => self.d = value.parse().map_err(|e| bad(&e))?,
            "seed" => self.seed = Some(value.parse().map_err(|e| bad(&e))?),
            _ => return Err(Error::input(format!("unknown generator parameter {key:?}"))),
        }
        Ok(())
    }
}

/// Parameters with the seed resolved; draws a fresh seed if none was given.
pub fn describe(p: &GenParams) -> GenParams {
    GenParams { seed: Some(p.seed.unwrap_or_else(rand::random)), ..p.clone() }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub instance: GspInstance,
    /// The parameters used, seed included.
    pub params: GenParams,
}

/// Normalized Zipf pmf over ranks `1..=n`.
pub fn zipf_pmf(n: usize, kappa: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-kappa)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

struct Zipf {
    cdf: Vec<f64>,
}

impl Zipf {
    fn new(n: usize, kappa: f64) -> Self {
        let mut acc = 0.0;
        let cdf = zipf_pmf(n, kappa)
            .into_iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Zipf { cdf }
    }

    /// Zero-based rank.
    fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// Platform sets as bit masks: bit 0 = A, bit 1 = B.
fn platform_mask(rng: &mut impl Rng) -> u8 {
    [0b01, 0b10, 0b11][rng.gen_range(0..3)]
}

fn reward(rng: &mut impl Rng, z_u: f64, d: f64) -> Result<f64> {
    if d == 0.0 {
        return Ok(z_u);
    }
    let mut z_u = z_u;
    for _ in 0..MAX_RESAMPLES {
        let value = z_u + rng.gen_range(-d..=d);
        if (REWARD_MIN..=REWARD_MAX).contains(&value) {
            return Ok(value);
        }
        z_u = rng.gen_range(REWARD_MIN..=REWARD_MAX);
    }
    Err(Error::Generation(format!("no reward in [0.01, 1] after {MAX_RESAMPLES} draws with d = {d}")))
}

pub fn generate(p: &GenParams) -> Result<Generated> {
    p.validate()?;
    let params = describe(p);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.expect("describe resolves the seed"));
    let exp = Exp::new(SIZE_RATE).expect("positive rate");

    let services: Vec<Service> =
        (0..p.n_services).map(|_| Service { size: p.phi * (1.0 + exp.sample(&mut rng) / SIZE_DIVISOR) }).collect();
    let service_platforms: Vec<u8> = (0..p.n_services).map(|_| platform_mask(&mut rng)).collect();
    let nodes: Vec<Node> = (0..p.n_nodes).map(|_| Node { capacity: CAPACITIES[rng.gen_range(0..4)] }).collect();
    let node_platforms: Vec<u8> = (0..p.n_nodes).map(|_| if rng.gen::<bool>() { 0b01 } else { 0b10 }).collect();

    let zipf = Zipf::new(p.n_services, p.kappa);
    let mut users = Vec::with_capacity(p.n_users);
    for _ in 0..p.n_users {
        let demand = zipf.sample(&mut rng);
        let z_u = rng.gen_range(REWARD_MIN..=REWARD_MAX);
        let rewards = node_platforms
            .iter()
            .map(|&np| if service_platforms[demand] & np != 0 { reward(&mut rng, z_u, p.d) } else { Ok(0.0) })
            .collect::<Result<Vec<f64>>>()?;
        users.push(GspUser { demand, rewards });
    }
    Ok(Generated { instance: GspInstance::new(services, nodes, users)?, params })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> GenParams {
        GenParams { n_services: 50, n_nodes: 5, n_users: 300, seed: Some(seed), ..GenParams::default() }
    }

    #[test]
    fn seeded_runs_are_identical() {
        assert_eq!(generate(&small(3)).unwrap(), generate(&small(3)).unwrap());
        assert_ne!(generate(&small(3)).unwrap().instance, generate(&small(4)).unwrap().instance);
    }

    #[test]
    fn zipf_ratio() {
        let pmf = zipf_pmf(2, 1.3);
        assert!((pmf[0] / pmf[1] - 2f64.powf(1.3)).abs() < 1e-12);
        assert!((pmf[0] / pmf[1] - 2.462_288).abs() < 1e-6);
    }

    #[test]
    fn defaults_and_description() {
        let d = GenParams::default();
        assert_eq!((d.n_services, d.n_nodes, d.n_users, d.kappa, d.phi, d.d), (1000, 10, 1000, 1.3, 1.0, 0.0));
        let resolved = describe(&GenParams { n_users: 7, ..d.clone() });
        assert_eq!(resolved.n_users, 7);
        assert!(resolved.seed.is_some());
        assert_eq!(describe(&GenParams { seed: Some(5), ..d }).seed, Some(5));
    }

    #[test]
    fn rejects_bad_parameters() {
        for p in [
            GenParams { kappa: 0.0, ..GenParams::default() },
            GenParams { phi: -1.0, ..GenParams::default() },
            GenParams { d: -0.1, ..GenParams::default() },
        ] {
            assert!(matches!(generate(&p), Err(Error::Input(_))));
        }
    }

    #[test]
    fn value_ranges() {
        for seed in 0..4 {
            let mut p = small(seed);
            p.d = 0.3;
            p.phi = 2.0;
            let g = generate(&p).unwrap().instance;
            assert!(g.services.iter().all(|s| s.size >= 2.0));
            assert!(g.nodes.iter().all(|n| CAPACITIES.contains(&n.capacity)));
            for u in &g.users {
                assert!(u.rewards.iter().all(|&r| r == 0.0 || (0.01..=1.0).contains(&r)));
            }
        }
    }

    #[test]
    fn impossible_noise_fails_cleanly() {
        // Z_u + Z_n lands in [0.01, 1] with tiny probability when d is huge.
        let p = GenParams { n_services: 1, n_nodes: 1, n_users: 50, d: 1e9, seed: Some(1), ..GenParams::default() };
        let r = generate(&p);
        // Either every entry is incompatible (reward 0) or resampling gives up.
        match r {
            Ok(g) => assert!(g.instance.users.iter().all(|u| u.rewards == vec![0.0])),
            Err(e) => assert!(matches!(e, Error::Generation(_))),
        }
    }

    #[test]
    fn mean_size_matches_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let exp = Exp::new(SIZE_RATE).unwrap();
        let n = 100_000;
        let mean = (0..n).map(|_| 1.0 + exp.sample(&mut rng) / SIZE_DIVISOR).sum::<f64>() / n as f64;
        let expected: f64 = 1.0 + (1.0 / 0.12) / 14.13;
        assert!((expected - 1.589_8).abs() < 1e-4);
        assert!((mean - expected).abs() / expected < 0.01);
    }

    #[test]
    fn zipf_chi_square() {
        let n = 20;
        let pmf = zipf_pmf(n, 1.3);
        let zipf = Zipf::new(n, 1.3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000;
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            counts[zipf.sample(&mut rng)] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(&pmf)
            .map(|(&c, &p)| {
                let e = p * draws as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // 0.999 quantile of chi-square with 19 degrees of freedom.
        assert!(chi2 < 43.82, "chi2 = {chi2}");
    }
}
