//! Counter-based splittable random streams.
//!
//! Every value produced anywhere in the crate is `mix64(seed + GAMMA * c)` for
//! some counter `c`: the SplitMix64 construction. Because `mix64` is a
//! bijection on `u64` and `GAMMA` is odd, distinct counters give distinct
//! outputs, so substreams carved out of disjoint counter ranges can never
//! collide. [`substream`] reserves 2^40 counters per stream id, which is what
//! lets the Monte Carlo harness hand independent, reproducible streams to
//! every (lambda, replication, purpose) triple and lets jitters be regenerated
//! from (seed, index) without storing them.

pub(crate) const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Counter bits reserved per substream: indices below 2^40 never collide
/// across stream ids.
pub(crate) const SUBSTREAM_SHIFT: u32 = 40;

/// SplitMix64 finalizer; a bijection on u64.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The `index`-th output of the stream with the given seed.
#[inline]
pub fn stream_nth(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(GAMMA.wrapping_mul(index.wrapping_add(1))))
}

/// Seed of substream `id` of `seed`: a disjoint 2^40-counter slice of the
/// parent orbit. Requires `id < 2^24`.
#[inline]
pub fn substream(seed: u64, id: u64) -> u64 {
    debug_assert!(id < 1 << (64 - SUBSTREAM_SHIFT));
    seed.wrapping_add(GAMMA.wrapping_mul(id << SUBSTREAM_SHIFT))
}

/// Map a u64 to the open interval (0, 1) with 52-bit resolution; 0 and 1 are
/// excluded by construction.
#[inline]
pub fn u64_to_open01(z: u64) -> f64 {
    ((z >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Sequential view of a stream: `next()` walks the counter range in order and
/// yields exactly the values [`stream_nth`] would.
#[derive(Debug, Clone)]
pub struct Stream {
    seed: u64,
    pos: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self { seed, pos: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = stream_nth(self.seed, self.pos);
        self.pos += 1;
        v
    }

    /// Uniform draw from the open interval (0, 1).
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        u64_to_open01(self.next_u64())
    }
}
