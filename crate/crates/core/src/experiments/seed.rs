//! Deterministic, named RNG streams.
//!
//! Every stream seed is a pure function of `(master_seed, run, purpose)`, so
//! work items can be scheduled in any order on any number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// SplitMix64 finaliser.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a master seed, an index and a tag into an independent stream seed.
pub fn derive_seed(master: u64, index: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(tag)).wrapping_add(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    MrpGeneration,
    Representation,
    Trajectory,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::MrpGeneration => 0x6d72_7067,
            Purpose::Representation => 0x7265_7072,
            Purpose::Trajectory => 0x7472_616a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPlan {
    pub master_seed: u64,
}

impl SeedPlan {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn seed(&self, run: u64, purpose: Purpose) -> u64 {
        derive_seed(self.master_seed, run, purpose.tag())
    }

    pub fn rng(&self, run: u64, purpose: Purpose) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed(run, purpose))
    }

    /// Every derived seed for `runs` runs, for result files.
    pub fn record(&self, runs: usize) -> SeedPlanRecord {
        let list = |p| (0..runs as u64).map(|r| self.seed(r, p)).collect();
        SeedPlanRecord {
            master_seed: self.master_seed,
            derivation: "splitmix64(splitmix64(master ^ splitmix64(tag)) + run), ChaCha8".into(),
            mrp_generation: list(Purpose::MrpGeneration),
            representation: list(Purpose::Representation),
            trajectory: list(Purpose::Trajectory),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedPlanRecord {
    pub master_seed: u64,
    pub derivation: String,
    pub mrp_generation: Vec<u64>,
    pub representation: Vec<u64>,
    pub trajectory: Vec<u64>,
}
