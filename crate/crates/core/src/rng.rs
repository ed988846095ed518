//! Seed derivation.
//!
//! Every random quantity in a trial is drawn from a [`Stream`], a
//! xoshiro256++ generator. Streams are derived from a 64-bit trial seed and
//! a 64-bit key with a counter-mix scheme:
//!
//! ```text
//! state_seed = mix64(seed ^ mix64(key + 0x9E37_79B9_7F4A_7C15))
//! stream     = Xoshiro256PlusPlus::seed_from_u64(state_seed)
//! ```
//!
//! where `mix64` is the SplitMix64 finalizer and `seed_from_u64` expands the
//! 64-bit value into the 256-bit state with SplitMix64. Agent `i` of a trial
//! uses key `i`; the initial placement uses [`PLACEMENT_KEY`]. Agents
//! therefore own independent, reproducible streams whose values do not
//! depend on how many other agents exist or in which order they move.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Stream = Xoshiro256PlusPlus;

/// Key of the stream used to sample initial positions.
pub const PLACEMENT_KEY: u64 = u64::MAX;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, key: u64) -> Stream {
    Stream::seed_from_u64(mix64(seed ^ mix64(key.wrapping_add(GOLDEN_GAMMA))))
}

/// Stable 64-bit hash of a sweep cell and trial index.
///
/// `h = mix64(mix64(mix64(n + γ) ^ m) + γ) ^ trial` followed by a final
/// `mix64`, with `γ` the golden-ratio increment used by SplitMix64.
pub fn cell_hash(n: u64, m: u64, trial: u64) -> u64 {
    let h = mix64(n.wrapping_add(GOLDEN_GAMMA)) ^ m;
    let h = mix64(h).wrapping_add(GOLDEN_GAMMA) ^ trial;
    mix64(h)
}

/// Per-trial seed of a sweep: `base_seed ^ cell_hash(n, m, trial)`.
pub fn trial_seed(base_seed: u64, n: u64, m: u64, trial: u64) -> u64 {
    base_seed ^ cell_hash(n, m, trial)
}
