//! Named deterministic random streams.
//!
//! Every stream is keyed by a 64-bit seed and a path-like name. Two streams
//! with the same seed and name produce the same sequence on every platform;
//! distinct names give independent ChaCha8 keys. Monte Carlo loops hand each
//! link, term or bit its own substream so results do not depend on the order
//! in which work is scheduled.

use rand::{Error as RandError, RngCore};
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    name: String,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, name: impl Into<String>) -> Self {
        let name = name.into();
        let mut hasher = Sha256::new();
        hasher.update(b"bell-hv-lab/stream/v1");
        hasher.update(seed.to_le_bytes());
        hasher.update(name.as_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        Self {
            seed,
            name,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// A fresh stream named `<self.name>/<child>` under the same seed.
    ///
    /// Substreams depend only on the seed and the full name, never on how
    /// much of the parent has been consumed.
    pub fn substream(&self, child: impl AsRef<str>) -> Self {
        Self::new(self.seed, format!("{}/{}", self.name, child.as_ref()))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), RandError> {
        self.rng.try_fill_bytes(dest)
    }
}
