//! Counter-based, splittable random streams.
//!
//! A [`Stream`] is an immutable value identified by a master seed and a path
//! of 64-bit indices. Its output is a pure function of `(master_seed, path,
//! counter)`, so children can be derived in any order and on any thread
//! without shared state, and every experiment replays bit-exactly regardless
//! of how replications are scheduled.

use rand_core::{impls, Error, RngCore};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// 64-bit finalizer from MurmurHash3 / SplitMix64.
#[inline(always)]
fn fmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// An immutable stream identity: master seed plus a path of child indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Stream {
    master_seed: u64,
    path: Vec<u64>,
    key: u64,
}

impl Stream {
    /// Root stream for `master_seed` (empty path).
    pub fn new(master_seed: u64) -> Self {
        Stream {
            master_seed,
            path: Vec::new(),
            key: fmix64(master_seed ^ 0x5EED_0F5E_ED0F_5EED).wrapping_add(GOLDEN),
        }
    }

    /// Child stream `index`. The result depends only on the parent identity
    /// and `index`, never on which other children were derived before.
    pub fn split(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        let key = fmix64(self.key ^ fmix64(index.wrapping_add(GOLDEN).wrapping_mul(GOLDEN)))
            .wrapping_add(path.len() as u64);
        Stream {
            master_seed: self.master_seed,
            path,
            key,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// A generator positioned at counter 0 of this stream.
    pub fn rng(&self) -> StreamRng {
        StreamRng {
            k1: self.key,
            k2: fmix64(self.key ^ 0xA5A5_A5A5_5A5A_5A5A),
            counter: 0,
        }
    }
}

/// Root stream for a master seed.
pub fn make_stream(master_seed: u64) -> Stream {
    Stream::new(master_seed)
}

/// Child of `parent` at `index`.
pub fn split(parent: &Stream, index: u64) -> Stream {
    parent.split(index)
}

/// Generator over one stream: `x_i = F(F(i * GOLDEN + k1) ^ k2)`.
///
/// Two keys make distinct streams non-overlapping permutations rather than
/// shifted copies of one sequence.
#[derive(Debug, Clone)]
pub struct StreamRng {
    k1: u64,
    k2: u64,
    counter: u64,
}

impl StreamRng {
    #[inline(always)]
    pub fn next_raw(&mut self) -> u64 {
        let c = self.counter;
        self.counter = c.wrapping_add(1);
        fmix64(fmix64(c.wrapping_mul(GOLDEN).wrapping_add(self.k1)) ^ self.k2)
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    #[inline(always)]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_raw() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Number of draws consumed so far.
    pub fn position(&self) -> u64 {
        self.counter
    }
}

impl RngCore for StreamRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_raw() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.next_raw()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        impls::fill_bytes_via_next(self, dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

/// Parse a master seed given as decimal or `0x`-prefixed hex.
pub fn parse_seed(text: &str) -> Result<u64, std::num::ParseIntError> {
    let t = text.trim();
    match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16),
        None => t.replace('_', "").parse::<u64>(),
    }
}
