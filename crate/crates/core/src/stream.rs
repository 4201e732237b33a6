//! Deterministic random streams.
//!
//! Every stream is addressed by a 256-bit key plus a 64-bit stream index.
//! Keys are derived by hashing the user seed together with a label path
//! (check name, sub-task name), and the stream index is the replicate
//! number. The underlying generator is ChaCha8, which is counter based: the
//! key/stream pair fully determines the output, so replicates can run on any
//! thread in any order and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// The random generator handed to samplers.
pub type Stream = ChaCha8Rng;

/// A node in the key-derivation tree.
#[derive(Clone, PartialEq, Eq)]
pub struct StreamSeed {
    key: [u8; 32],
}

impl std::fmt::Debug for StreamSeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "StreamSeed(")?;
        for b in &self.key[..6] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

impl StreamSeed {
    pub fn new(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"regen/root");
        h.update(seed.to_le_bytes());
        StreamSeed {
            key: h.finalize().into(),
        }
    }

    /// Child key for a named sub-task.
    pub fn derive(&self, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        StreamSeed {
            key: h.finalize().into(),
        }
    }

    /// Independent generator number `index` under this key.
    pub fn stream(&self, index: u64) -> Stream {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}

/// Runs `f` once per replicate, each on its own stream, in parallel.
///
/// Results come back in replicate order regardless of scheduling. The first
/// error (by replicate index) wins.
pub fn replicate_map<T, F>(seed: &StreamSeed, replicates: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut Stream) -> Result<T> + Sync + Send,
{
    (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.stream(i as u64);
            f(&mut rng)
        })
        .collect()
}
