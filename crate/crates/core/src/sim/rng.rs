use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream reserved for seeded initial draws, disjoint from particle streams.
pub const INITIAL_STREAM: u64 = u64::MAX;

/// Counter-based stream for one particle: the key is `(seed, id)`, so a
/// particle's noise does not depend on how work is split across threads.
pub fn particle_rng(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
