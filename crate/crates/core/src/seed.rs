//! Named random streams derived from one master seed.
//!
//! Each stream is ChaCha20 keyed by the master seed (expanded through
//! `seed_from_u64`) with the stream's fixed id as the ChaCha stream number.
//! Streams never overlap, so adding a consumer leaves the others untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Latent samples feeding the data source.
    DataZ,
    /// Latent samples feeding the generator during training.
    GeneratorZ,
    /// Parameter initialization.
    Init,
    /// Label flips.
    Flips,
    /// Per-step seeds for shot sampling.
    Shots,
    /// Fixed evaluation batches.
    Eval,
}

impl Stream {
    pub fn id(self) -> u64 {
        match self {
            Stream::DataZ => 1,
            Stream::GeneratorZ => 2,
            Stream::Init => 3,
            Stream::Flips => 4,
            Stream::Shots => 5,
            Stream::Eval => 6,
        }
    }
}

pub fn stream_rng(master: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

pub fn named(master: u64, stream: Stream) -> ChaCha20Rng {
    stream_rng(master, stream.id())
}
