//! Benchmark processes: the one-state and two-state examples and random MRPs.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::seed::derive_seed;
use crate::mrp::Mrp;
use crate::representation::Representation;

/// Default branch/self-loop probability of the two small examples.
pub const DEFAULT_CHALLENGE_P: f64 = 0.5;
/// Discount used for random MRPs unless configured otherwise.
pub const DEFAULT_RANDOM_GAMMA: f64 = 0.99;
const MAX_REDRAWS: u32 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Challenge {
    OneState,
    TwoState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChallengeSpec {
    pub which: Challenge,
    pub p: f64,
}

impl ChallengeSpec {
    pub fn build(&self) -> Result<(Mrp, Representation)> {
        match self.which {
            Challenge::OneState => make_one_state(self.p),
            Challenge::TwoState => make_two_state(self.p),
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidConfig(format!("p must lie in (0, 1), got {p}")));
    }
    Ok(())
}

/// One state seen through a single binary feature.
///
/// With probability `p` the state loops to itself with reward 0; otherwise
/// the episode ends with reward 1. gamma = 1, so every return is exactly 1.
pub fn make_one_state(p: f64) -> Result<(Mrp, Representation)> {
    check_p(p)?;
    let mrp = Mrp::new(vec![vec![p]], vec![1.0 - p], vec![vec![0.0]], vec![1.0], 0.0, 1.0, 0)?;
    Ok((mrp, Representation::aliased_constant(1)?))
}

/// Two states sharing one binary feature.
///
/// From state 0 the process moves to state 1 with probability `p` and
/// terminates otherwise, both with reward 0. State 1 always terminates with
/// reward 1. gamma = 1, giving v = (p, 1).
pub fn make_two_state(p: f64) -> Result<(Mrp, Representation)> {
    check_p(p)?;
    let mrp = Mrp::new(
        vec![vec![0.0, p], vec![0.0, 0.0]],
        vec![1.0 - p, 1.0],
        vec![vec![0.0; 2]; 2],
        vec![0.0, 1.0],
        0.0,
        1.0,
        0,
    )?;
    Ok((mrp, Representation::aliased_constant(2)?))
}

/// A random MRP (k, b, sigma).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomMrpSpec {
    pub k: usize,
    pub b: usize,
    pub sigma: f64,
    pub seed: u64,
    pub gamma: f64,
}

impl RandomMrpSpec {
    pub fn new(k: usize, b: usize, sigma: f64, seed: u64) -> Self {
        Self {
            k,
            b,
            sigma,
            seed,
            gamma: DEFAULT_RANDOM_GAMMA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.b == 0 || self.b > self.k {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= b <= k, got k = {}, b = {}",
                self.k, self.b
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!(
                "continuing random MRPs need gamma in [0, 1), got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Short tag such as `k10_b3_s0.1`.
    pub fn tag(&self) -> String {
        format!("k{}_b{}_s{}", self.k, self.b, self.sigma)
    }
}

/// Output of [`make_random_mrp`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomMrp {
    pub mrp: Mrp,
    /// How many reducible draws were discarded before this one.
    pub redraws: u32,
}

/// Builds a continuing random MRP.
///
/// Each state gets `b` distinct successors chosen uniformly, transition
/// probabilities from normalised uniform draws, and N(0, 1) expected rewards
/// on its allowed transitions. Draws whose transition graph is not strongly
/// connected are discarded and redrawn from the next sub-seed.
pub fn make_random_mrp(spec: &RandomMrpSpec) -> Result<RandomMrp> {
    spec.validate()?;
    for attempt in 0..MAX_REDRAWS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, attempt as u64, 0x4d52_5047));
        let mrp = draw(spec, &mut rng)?;
        if mrp.is_irreducible() {
            return Ok(RandomMrp {
                mrp,
                redraws: attempt,
            });
        }
    }
    Err(Error::InvalidConfig(format!(
        "no irreducible MRP found for {} after {MAX_REDRAWS} draws",
        spec.tag()
    )))
}

fn draw(spec: &RandomMrpSpec, rng: &mut ChaCha8Rng) -> Result<Mrp> {
    let k = spec.k;
    let mut p = vec![vec![0.0; k]; k];
    let mut r = vec![vec![0.0; k]; k];
    for s in 0..k {
        let next = index::sample(rng, k, spec.b).into_vec();
        // (0, 1] so every chosen successor keeps positive mass.
        let weights: Vec<f64> = next.iter().map(|_| 1.0 - rng.random::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        for (&j, w) in next.iter().zip(&weights) {
            p[s][j] = w / total;
            r[s][j] = rng.sample(StandardNormal);
        }
    }
    Mrp::new(p, vec![0.0; k], r, vec![0.0; k], spec.sigma, spec.gamma, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_state_value_is_one() {
        for p in [0.1, 0.5, 0.9] {
            let (m, rep) = make_one_state(p).unwrap();
            assert!((m.true_values().unwrap().v[0] - 1.0).abs() < 1e-12);
            assert_eq!(m.state_distribution().unwrap(), vec![1.0]);
            assert_eq!(rep.n(), 1);
        }
        assert!(make_one_state(1.0).is_err());
        assert!(make_one_state(0.0).is_err());
    }

    #[test]
    fn two_state_values_differ() {
        let (m, rep) = make_two_state(0.5).unwrap();
        let v = m.true_values().unwrap().v;
        assert!((v[0] - 0.5).abs() < 1e-15);
        assert!((v[1] - 1.0).abs() < 1e-15);
        assert_eq!(rep.features_of(0).unwrap(), rep.features_of(1).unwrap());
        let d = m.state_distribution().unwrap();
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((d[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn random_rows_have_b_entries() {
        let out = make_random_mrp(&RandomMrpSpec::new(10, 3, 0.1, 7)).unwrap();
        let m = &out.mrp;
        for s in 0..10 {
            let nz = (0..10).filter(|&j| m.transition_prob(s, j) > 0.0).count();
            assert_eq!(nz, 3);
            let sum: f64 = (0..10).map(|j| m.transition_prob(s, j)).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        assert!(m.is_irreducible());
        assert!(!m.is_episodic());
        assert_eq!(m.gamma(), DEFAULT_RANDOM_GAMMA);
    }

    #[test]
    fn random_mrp_is_seeded() {
        let spec = RandomMrpSpec::new(100, 3, 0.0, 42);
        let a = serde_json::to_string(&make_random_mrp(&spec).unwrap().mrp).unwrap();
        let b = serde_json::to_string(&make_random_mrp(&spec).unwrap().mrp).unwrap();
        assert_eq!(a, b);
        let c = make_random_mrp(&RandomMrpSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, serde_json::to_string(&c.mrp).unwrap());
    }

    #[test]
    fn random_spec_validation() {
        assert!(make_random_mrp(&RandomMrpSpec::new(3, 4, 0.1, 0)).is_err());
        assert!(make_random_mrp(&RandomMrpSpec::new(3, 0, 0.1, 0)).is_err());
        assert!(make_random_mrp(&RandomMrpSpec::new(3, 2, -0.1, 0)).is_err());
        let one_successor = make_random_mrp(&RandomMrpSpec::new(5, 1, 0.0, 3)).unwrap();
        assert!(one_successor.mrp.is_irreducible());
    }
}
