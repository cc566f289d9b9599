use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the simulation.
pub type SimRng = ChaCha8Rng;

/// Independent generator for the `index`-th episode of a batch seeded by
/// `base`. Batches split this way give the same results in any execution
/// order.
pub fn episode_rng(base: u64, index: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(base);
    rng.set_stream(index);
    rng
}
