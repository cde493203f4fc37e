//! Reproducible random streams.
//!
//! Every trial owns a [`RngStream`] keyed by `(seed, stream_id)`. The backing
//! generator is ChaCha8, whose 64-bit stream selector gives independent
//! sequences for distinct ids under one key, so results never depend on the
//! order in which a worker pool happens to execute trials.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream under the same seed whose id is a hash of this stream's
    /// id and `tag`. Used to key sub-runs (restart index, probe index, ...).
    pub fn fork(&self, tag: u64) -> RngStream {
        RngStream::new(self.seed, mix(self.stream_id ^ mix(tag.wrapping_add(0x9e37_79b9_7f4a_7c15))))
    }

    /// Stream for trial `trial` of an ensemble run under `seed`.
    pub fn for_trial(seed: u64, trial: u64) -> RngStream {
        RngStream::new(seed, mix(trial))
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
