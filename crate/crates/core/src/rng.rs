//! Seed derivation and elementary sampling transforms.
//!
//! Every piece of randomness in the lab flows from a single `u64` master seed
//! through [`substream`]: a replica, a CFTP block or an event's lazy extras
//! each get an independent ChaCha stream keyed by `(seed, path)`. Derivation
//! is a SplitMix64 chain, so substreams can be opened in any order and from
//! any thread without coordination, and reruns are bit-identical.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the lab.
pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 output step (also advances the state by the golden ratio).
fn splitmix64(state: &mut u64) {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    *state = z ^ (z >> 31);
}

/// Derive an independent generator from `(seed, path)`.
///
/// `path` is a hierarchical address, e.g. `[EXP_TAG, replica]` or
/// `[CFTP_TAG, sample, block]`. Distinct paths yield independent streams;
/// identical `(seed, path)` pairs always yield the same stream.
pub fn substream(seed: u64, path: &[u64]) -> Rng {
    let mut state = seed ^ 0x6A09_E667_F3BC_C909; // sqrt(2) fractional bits
    splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(GOLDEN);
        splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        splitmix64(&mut state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    Rng::from_seed(key)
}

/// Exponential variate with the given mean via inverse CDF.
///
/// `mean = 0` is the point mass at 0 (degenerate boundary temperature).
pub fn exp_with_mean(rng: &mut Rng, mean: f64) -> f64 {
    debug_assert!(mean >= 0.0);
    use rand::Rng as _;
    let u: f64 = rng.gen(); // in [0, 1)
    -mean * (1.0 - u).ln()
}

/// Geometric on {0, 1, 2, ...} with the given mean, by inverse CDF from a
/// uniform variate: P(K = k) = (m/(m+1))^k / (m+1).
///
/// `mean = 0` is the point mass at 0.
pub fn geometric_from_uniform(u: f64, mean: f64) -> u64 {
    debug_assert!((0.0..1.0).contains(&u));
    debug_assert!(mean >= 0.0);
    if mean == 0.0 {
        return 0;
    }
    // ln(1-u)/ln(m/(m+1)); both logs negative.
    let k = ((1.0 - u).ln() / (mean / (mean + 1.0)).ln()).floor();
    k as u64
}

/// Geometric on {0, 1, 2, ...} with the given mean, derived from a unit-rate
/// exponential mark: `1 - exp(-b)` is uniform, so this is the same inverse CDF
/// as [`geometric_from_uniform`] evaluated as `floor(b / ln(1 + 1/mean))`.
pub fn geometric_from_exp_mark(b: f64, mean: f64) -> u64 {
    debug_assert!(b >= 0.0);
    debug_assert!(mean >= 0.0);
    if mean == 0.0 {
        return 0;
    }
    (b / (1.0 + 1.0 / mean).ln()).floor() as u64
}

/// Poisson count with the given rate, by accumulating unit-exponential
/// inter-arrival times (numerically safe for any rate; O(rate) draws).
pub fn poisson_count(rng: &mut Rng, rate: f64) -> u64 {
    debug_assert!(rate >= 0.0);
    if rate == 0.0 {
        return 0;
    }
    let mut t = 0.0;
    let mut n = 0u64;
    loop {
        t += exp_with_mean(rng, 1.0);
        if t > rate {
            return n;
        }
        n += 1;
    }
}
