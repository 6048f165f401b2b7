//! Keyed random streams.
//!
//! Every random draw in the crate is addressed by `(seed, stream, slot)`: the
//! seed keys a ChaCha8 generator, the stream selects one of its 2^64 independent
//! streams and the slot is a fixed-width block of output words. Seeking to a slot
//! is O(1), so any chunking of a computation reproduces the same numbers.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Output words (u64) reserved for one potential draw.
pub const POTENTIAL_WORDS: u64 = 2;

/// Purpose tags for stream derivation.
pub mod tag {
    pub const FIELD: u64 = 0x01;
    pub const POOL_SWEEP: u64 = 0x02;
    pub const ROOT_SAMPLES: u64 = 0x03;
    pub const PATH_SAMPLES: u64 = 0x04;
    pub const BOUNDARY: u64 = 0x05;
    pub const ENSEMBLE: u64 = 0x06;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream id for a purpose tag and a sub-index (sweep number, user stream, ...).
#[inline]
pub fn stream_id(tag: u64, sub: u64) -> u64 {
    splitmix64(tag.wrapping_mul(0xd6e8_feb8_6659_fd93) ^ splitmix64(sub))
}

/// Stream id keyed by a tag and two sub-indices.
#[inline]
pub fn stream_id2(tag: u64, a: u64, b: u64) -> u64 {
    stream_id(tag, splitmix64(a) ^ b.rotate_left(32))
}

/// Seed for the `member`-th element of an ensemble derived from a master seed.
pub fn derive_seed(seed: u64, member: u64) -> u64 {
    splitmix64(seed ^ stream_id(tag::ENSEMBLE, member))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyedStream {
    seed: u64,
    stream: u64,
}

impl KeyedStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Generator positioned at `slot`, where every slot is `words_per_slot` u64 words wide.
    pub fn at(&self, slot: u64, words_per_slot: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(u128::from(slot) * u128::from(words_per_slot) * 2);
        rng
    }
}

/// Uniform in `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_f64(u: u64) -> f64 {
    (u >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in `(0, 1]`.
#[inline]
pub fn open_unit_f64(u: u64) -> f64 {
    ((u >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Index in `[0, n)` by multiply-shift; one word per draw, bias below `n / 2^64`.
#[inline]
pub fn index_below(u: u64, n: usize) -> usize {
    ((u128::from(u) * n as u128) >> 64) as usize
}

#[inline]
pub fn next_index<R: RngCore>(rng: &mut R, n: usize) -> usize {
    index_below(rng.next_u64(), n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeking_matches_sequential_reads() {
        let s = KeyedStream::new(42, stream_id(tag::FIELD, 0));
        let mut seq = s.at(0, 3);
        let words: Vec<u64> = (0..30).map(|_| seq.next_u64()).collect();
        for slot in 0..10u64 {
            let mut r = s.at(slot, 3);
            for w in 0..3 {
                assert_eq!(r.next_u64(), words[(slot * 3 + w) as usize]);
            }
        }
    }

    #[test]
    fn streams_differ() {
        let a = KeyedStream::new(1, stream_id(tag::POOL_SWEEP, 0)).at(0, 1).next_u64();
        let b = KeyedStream::new(1, stream_id(tag::POOL_SWEEP, 1)).at(0, 1).next_u64();
        assert_ne!(a, b);
    }

    #[test]
    fn unit_ranges() {
        assert_eq!(unit_f64(0), 0.0);
        assert!(unit_f64(u64::MAX) < 1.0);
        assert!(open_unit_f64(0) > 0.0);
        assert_eq!(open_unit_f64(u64::MAX), 1.0);
        assert_eq!(index_below(u64::MAX, 7), 6);
        assert_eq!(index_below(0, 7), 0);
    }
}
