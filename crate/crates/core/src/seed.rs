//! Named random substreams derived from one root seed.
//!
//! Every consumer (initialization, shuffling, augmentation, dropout) draws
//! from its own stream so adding draws in one place never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Generator for the stream `name` under `root`.
pub fn substream(root: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(fnv1a(name));
    rng
}

/// A `u64` seed for the stream `name` under `root`.
pub fn subseed(root: u64, name: &str) -> u64 {
    use rand::RngCore;
    substream(root, name).next_u64()
}
