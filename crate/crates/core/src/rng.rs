//! Keyed counter-based random streams.
//!
//! Every stream is identified by a tuple of 64-bit words (for instance
//! `(master_seed, replication, arm)`). The tuple is hashed into a stream
//! seed and an odd increment, and the `i`-th output is a SplitMix64 finaliser
//! applied to `seed + i * increment`. Outputs depend only on the key and the
//! position, never on which thread draws them or in what order streams are
//! created, so parallel runs are reproducible bit for bit.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// Variant finaliser used for increments (as in SplittableRandom).
#[inline]
fn mix_gamma(z: u64) -> u64 {
    let mut z = (z ^ (z >> 33)).wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    z = (z ^ (z >> 33)).wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    (z ^ (z >> 33)) | 1
}

/// FNV-1a hash of a label, used to turn names into key words.
pub fn label_hash(label: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in label.as_bytes() {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomStream {
    seed: u64,
    gamma: u64,
    counter: u64,
}

impl RandomStream {
    /// Stream keyed by an ordered tuple of words.
    pub fn keyed(key: &[u64]) -> Self {
        let mut h = 0x6A09_E667_F3BC_C908u64;
        for (i, &word) in key.iter().enumerate() {
            h = mix64(h ^ mix64(word.wrapping_add((i as u64 + 1).wrapping_mul(GOLDEN_GAMMA))));
        }
        RandomStream {
            seed: mix64(h),
            gamma: mix_gamma(h ^ 0xD1B5_4A32_D192_ED03),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(self.counter.wrapping_mul(self.gamma)))
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`, by rejection (no modulo bias).
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return x % n;
            }
        }
    }

    /// Number of values drawn so far.
    pub fn position(&self) -> u64 {
        self.counter
    }
}
