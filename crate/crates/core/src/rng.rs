//! Deterministic random streams.
//!
//! One root seed per invocation. Every independent unit of work (a
//! replicate's generator, a chain's layer or vertex) draws from its own
//! ChaCha8 stream: the generator is seeded with the root seed and the
//! 64-bit stream id packs
//!
//! ```text
//! bits 56..64  purpose
//! bits 32..56  replicate
//! bits 24..32  chain
//! bits  0..24  unit (layer or vertex)
//! ```
//!
//! so the same `(seed, purpose, replicate, chain, unit)` always yields the
//! same sequence regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Graph = 1,
    Parameters = 2,
    Data = 3,
    Sampler = 4,
    Signs = 5,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamKey {
    pub purpose: Purpose,
    pub replicate: u32,
    pub chain: u8,
    pub unit: u32,
}

impl StreamKey {
    pub fn new(purpose: Purpose) -> Self {
        Self { purpose, replicate: 0, chain: 0, unit: 0 }
    }

    pub fn replicate(mut self, r: u32) -> Self {
        self.replicate = r;
        self
    }

    pub fn chain(mut self, c: u8) -> Self {
        self.chain = c;
        self
    }

    pub fn unit(mut self, u: u32) -> Self {
        self.unit = u;
        self
    }

    pub fn id(self) -> u64 {
        debug_assert!(self.replicate < 1 << 24 && self.unit < 1 << 24);
        ((self.purpose as u64) << 56)
            | (((self.replicate as u64) & 0xff_ffff) << 32)
            | ((self.chain as u64) << 24)
            | ((self.unit as u64) & 0xff_ffff)
    }
}

pub fn stream(seed: u64, key: StreamKey) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key.id());
    rng
}
