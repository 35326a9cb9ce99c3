//! Reproducible random streams.
//!
//! Every sampling loop in the crate splits its work into fixed-size chunks and
//! gives chunk `k` its own ChaCha stream `k` under the master seed. Chunk
//! boundaries depend only on the trial count, so results are identical no
//! matter how many worker threads rayon uses.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Trials per independent stream.
pub const CHUNK: usize = 1 << 14;

/// A seeded, splittable random source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamSeed {
    pub seed: u64,
    /// Offset added to every stream index, so unrelated experiments sharing a
    /// master seed do not reuse streams.
    pub domain: u64,
}

impl StreamSeed {
    pub fn new(seed: u64) -> Self {
        Self { seed, domain: 0 }
    }

    /// Derive a seed for a distinct experiment domain.
    pub fn domain(self, domain: u64) -> Self {
        Self {
            seed: self.seed,
            domain: self.domain.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(domain + 1),
        }
    }

    pub fn stream(self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.domain.wrapping_shl(32) ^ index);
        rng
    }
}

/// Run `per_chunk(rng, start, len)` over `total` trials split into [`CHUNK`]
/// sized pieces and concatenate the outputs in chunk order.
pub fn par_chunks<T, F>(seed: StreamSeed, total: usize, per_chunk: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize, usize) -> Vec<T> + Sync,
{
    let chunks = total.div_ceil(CHUNK);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let start = k * CHUNK;
            let len = CHUNK.min(total - start);
            let mut rng = seed.stream(k as u64);
            per_chunk(&mut rng, start, len)
        })
        .collect();
    let mut out = Vec::with_capacity(total);
    for p in parts {
        out.extend(p);
    }
    out
}
