//! Seeded random streams.
//!
//! Every random draw in the crate goes through [`ChaCha8Rng`] so that results are
//! reproducible across platforms. Independent consumers of one seed (matrix entries, the
//! solution vector, row sampling inside a solver, the row permutation) use distinct ChaCha
//! streams so they never share a keystream.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Named keystreams derived from one 64-bit seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Matrix = 1,
    Solution = 2,
    Sampling = 3,
    Permutation = 4,
}

pub fn stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
