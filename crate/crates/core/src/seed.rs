//! Reproducible random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Random stream generator used throughout the crate.
pub type Rng = ChaCha12Rng;

/// Which part of a replicate a stream feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u16)]
pub enum Stream {
    Lambda = 1,
    Germs1 = 2,
    Germs2 = 3,
    Field = 4,
    Sampler = 5,
    Thinning = 6,
    Oracle = 7,
}

/// Master seed plus `(replicate, stream)` identifier.
///
/// Distinct identifiers select distinct ChaCha streams of the same key, so
/// replicates and components never share random numbers and any single
/// realization can be regenerated on its own.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedKey {
    pub master: u64,
    pub replicate: u32,
    pub stream: Stream,
}

impl SeedKey {
    pub fn new(master: u64, replicate: u32, stream: Stream) -> Self {
        Self { master, replicate, stream }
    }

    pub fn with_stream(self, stream: Stream) -> Self {
        Self { stream, ..self }
    }

    pub fn stream_id(&self) -> u64 {
        ((self.replicate as u64) << 16) | self.stream as u64
    }

    pub fn rng(&self) -> Rng {
        let mut rng = Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream_id());
        rng
    }
}
