//! Seeded random streams.
//!
//! Every stochastic transform takes an explicit [`RngStream`]. The generator
//! is ChaCha8 (a counter-based stream cipher), so a given seed yields the same
//! draw sequence on every platform. Sub-streams for parallel tasks are derived
//! with [`derive_seed`] from `(master_seed, item id, transform index)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for one `(item, transform)` task under a master seed.
    pub fn for_task(master_seed: u64, item_id: &str, transform_index: u64) -> Self {
        Self::new(derive_seed(master_seed, item_id, transform_index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream, consuming one draw from this one.
    pub fn fork(&mut self) -> Self {
        let s = self.inner.next_u64();
        Self::new(splitmix64(s ^ self.seed))
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

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the id bytes; stable across platforms and Rust versions,
/// unlike `std::hash`.
fn hash_id(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn derive_seed(master_seed: u64, item_id: &str, transform_index: u64) -> u64 {
    let a = splitmix64(master_seed);
    let b = splitmix64(a ^ hash_id(item_id));
    splitmix64(b ^ transform_index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
