//! Per-trial random streams.
//!
//! Every trial gets its own ChaCha8 generator whose seed is a mix of the
//! master seed and the trial index, so results do not depend on how trials
//! are scheduled across worker threads.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `master`.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master.wrapping_add(GOLDEN_GAMMA)) ^ index.wrapping_mul(GOLDEN_GAMMA).wrapping_add(GOLDEN_GAMMA))
}

pub fn trial_rng(master: u64, index: u64) -> TrialRng {
    TrialRng::seed_from_u64(stream_seed(master, index))
}

/// A uniform variate on the open interval (0, 1).
#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// A master seed from OS entropy, for runs that should not repeat.
pub fn entropy_seed() -> u64 {
    rand::random()
}
