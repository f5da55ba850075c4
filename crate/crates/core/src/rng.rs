//! Seeded random streams.
//!
//! Every consumer of randomness derives its generator from the single run
//! seed plus a fixed stream id, so adding draws in one place never shifts the
//! sequence seen by another. The generator is ChaCha8 with the stream id
//! passed to `set_stream`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Parameter initialization.
    Init = 1,
    /// Per-epoch mini-batch permutation.
    Shuffle = 2,
    /// Synthetic series generation.
    Synth = 3,
    /// Probe control permutations.
    ProbeControl = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: u64 = stream_rng(7, Stream::Init).random();
        let b: u64 = stream_rng(7, Stream::Init).random();
        let c: u64 = stream_rng(7, Stream::Shuffle).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
