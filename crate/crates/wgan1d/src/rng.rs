//! Seeded random number generation with per-component stream splitting.
//!
//! Every run owns one logical seed; each consumer (data synthesis, weight
//! init, training noise, ...) draws from its own ChaCha stream so that
//! adding draws to one component never perturbs another. Runs are therefore
//! reproducible bit-for-bit from `(seed, stream)`.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed stream ids. Keep values stable: artifacts depend on them.
pub mod streams {
    /// Synthetic dataset generation / cities subsampling.
    pub const DATA: u64 = 0;
    /// Generator weight initialization.
    pub const GEN_INIT: u64 = 1;
    /// Baseline critic weight initialization.
    pub const CRITIC_INIT: u64 = 2;
    /// Generator input noise during training.
    pub const TRAIN_NOISE: u64 = 3;
    /// Minibatch index sampling from the training set.
    pub const REAL_BATCH: u64 = 4;
    /// Interpolation coefficients for the gradient penalty.
    pub const GP_EPS: u64 = 5;
    /// Generator input noise at evaluation checkpoints.
    pub const EVAL: u64 = 6;
    /// Kernel density estimator sampling.
    pub const KDE: u64 = 7;
}

/// RNG for `stream` of the run identified by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
