//! Seeded experiment harness.

pub mod challenge;
pub mod io;
pub mod seed;
pub mod summary;
pub mod sweep;

pub use challenge::{
    run_challenge_one_state, run_challenge_two_state, OneStateConfig, OneStateResult, TwoStateConfig,
    TwoStateResult,
};
pub use seed::{Purpose, SeedPlan};
pub use summary::{aggregate_and_normalize, best_alpha_curve, CellMean, MethodSummary};
pub use sweep::{run_sweep, SweepConfig, SweepResult};

use crate::mrp::Transition;

/// FNV-1a over a transition stream, used to check that cells share samples.
#[derive(Debug, Clone)]
pub struct StreamHasher(u64);

impl StreamHasher {
    pub fn new() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }

    fn eat(&mut self, x: u64) {
        for b in x.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    pub fn push(&mut self, t: &Transition) {
        self.eat(t.s as u64);
        self.eat(t.next.map_or(u64::MAX, |n| n as u64));
        self.eat(t.reward.to_bits());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for StreamHasher {
    fn default() -> Self {
        Self::new()
    }
}
