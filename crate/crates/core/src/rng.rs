//! Counter-based random streams keyed by `(master_seed, stream_index)`.
//!
//! Each stream is a ChaCha20 generator whose key is derived from the master
//! seed and whose 64-bit stream id is the stream index, so distinct indices
//! give independent, reproducible sequences that can be consumed from any
//! thread. Normal variates use `rand_distr::StandardNormal` (ziggurat) on
//! top of that generator.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        RngStream {
            master_seed,
            stream_index,
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Sibling stream under the same master seed.
    pub fn with_index(&self, stream_index: u64) -> Self {
        RngStream::new(self.master_seed, stream_index)
    }

    /// Sibling stream keyed by a tuple of labels.
    pub fn keyed(&self, parts: &[&[u8]]) -> Self {
        self.with_index(stream_key(parts))
    }
}

/// Stable 64-bit FNV-1a hash over length-prefixed parts.
pub fn stream_key(parts: &[&[u8]]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut eat = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(PRIME);
    };
    for part in parts {
        for b in (part.len() as u64).to_le_bytes() {
            eat(b);
        }
        for &b in *part {
            eat(b);
        }
    }
    h
}
