//! Overflow-safe logistic helpers and seeded RNG construction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `log(1 + exp(t))` without overflow for large |t|.
#[inline]
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Logistic loss `log(1 + exp(-y f))` for a label y in {+1, -1}.
#[inline]
pub fn logistic_loss(y: f64, f: f64) -> f64 {
    softplus(-y * f)
}

/// `1 / (1 + exp(-t))`, stable in both tails.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Deterministic RNG for a (seed, stream) pair. Streams give independent
/// sequences for sub-tasks (one per tree, one per redundancy channel, ...).
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
