//! Counter-based random numbers.
//!
//! A draw is a pure function of its key `(seed, stream, lane, counter)`, so
//! the sequence seen by any neuron does not depend on evaluation order or
//! thread count. The mixer is the SplitMix64 finalizer applied while
//! absorbing each key word.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64 uniformly distributed bits for the given key.
#[inline]
pub fn counter_u64(seed: u64, stream: u64, lane: u64, counter: u64) -> u64 {
    let mut h = mix(seed.wrapping_add(GOLDEN));
    h = mix(h ^ stream.wrapping_mul(GOLDEN).wrapping_add(1));
    h = mix(h ^ lane.wrapping_mul(GOLDEN).wrapping_add(2));
    mix(h ^ counter.wrapping_mul(GOLDEN).wrapping_add(3))
}

/// Threshold such that `counter_u64(..) < threshold` holds with probability `p`.
pub fn bernoulli_threshold(p: f64) -> u64 {
    if p <= 0.0 {
        0
    } else if p >= 1.0 {
        u64::MAX
    } else {
        (p * 18_446_744_073_709_551_616.0) as u64
    }
}

/// Derives an independent 64-bit seed for a sub-stream (e.g. one connection).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    counter_u64(seed, stream, u64::MAX, u64::MAX)
}
