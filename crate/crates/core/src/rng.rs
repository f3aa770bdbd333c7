//! Seeding conventions.
//!
//! Every stochastic component draws from [`Rng`], a ChaCha8 stream cipher
//! generator. ChaCha output is specified bit-for-bit independently of the
//! platform, so a seed identifies a run on any machine.
//!
//! Sub-streams are derived with [`derive_seed`], which passes
//! `master + index * GOLDEN` through the SplitMix64 finalizer. A stream's seed
//! depends only on its own `(master, index)` pair, so adding seeds to a sweep
//! never perturbs the rows that already exist.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(index.wrapping_mul(GOLDEN)))
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Stream `index` of the run identified by `master`.
pub fn substream(master: u64, index: u64) -> Rng {
    seeded(derive_seed(master, index))
}

/// Uniform index in `0..n`, sampled through `u64` so the draw does not
/// depend on the platform's pointer width.
pub fn index(rng: &mut Rng, n: usize) -> usize {
    debug_assert!(n > 0);
    rng.gen_range(0..n as u64) as usize
}

/// Sample from a discrete distribution given as probabilities.
pub fn categorical(rng: &mut Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave the cumulative sum a hair below 1.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}
