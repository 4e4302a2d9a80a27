//! Seeding rules for reproducible replica streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// The generator for replica `index` of a run seeded with `seed`.
///
/// All replicas share the ChaCha key derived from the seed and differ in the
/// stream counter, so streams never overlap and do not depend on how
/// replicas are spread across worker threads.
pub fn replica_rng(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
