//! Counter-based random streams.
//!
//! Every random draw in the simulator is a pure function of a key
//! `(seed, stream, id, counter)`. A neuron's synapses and its external drive
//! at a given step therefore come out identical no matter which rank owns
//! the neuron or in what order ranks run.

use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

/// Independent purposes that draw from the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Synapses = 1,
    ExternalDrive = 2,
    Initial = 3,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn fmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds the key words into a single 64-bit generator seed.
#[inline]
pub fn key(seed: u64, stream: Stream, id: u64, counter: u64) -> u64 {
    let mut h = fmix64(seed ^ GOLDEN);
    h = fmix64(h ^ (stream as u64).wrapping_mul(GOLDEN));
    h = fmix64(h.wrapping_add(id).wrapping_mul(GOLDEN));
    fmix64(h ^ counter.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Generator positioned at the start of the stream for the given key.
#[inline]
pub fn stream_rng(seed: u64, stream: Stream, id: u64, counter: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(key(seed, stream, id, counter))
}
