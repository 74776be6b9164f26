//! Counter-based random streams.
//!
//! Every replicate draws from its own ChaCha stream, keyed by the master seed
//! and addressed by (scenario id, replicate index). Replicates can therefore be
//! evaluated in any order or on any worker with identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose of a stream; different purposes never share key material.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    /// Trial data generation, shared by all designs.
    Data,
    /// MCMC chains, one domain per design tag.
    Mcmc(u32),
}

impl StreamKind {
    fn tag(self) -> u64 {
        match self {
            StreamKind::Data => 0x6461_7461,
            StreamKind::Mcmc(design) => 0x6d63_6d63_0000_0000 | design as u64,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key(master: u64, kind: StreamKind) -> [u8; 32] {
    let mut state = mix64(master ^ mix64(kind.tag()));
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        state = mix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    seed
}

/// The random stream of one replicate.
pub fn replicate_stream(master: u64, kind: StreamKind, scenario_id: u32, replicate: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key(master, kind));
    rng.set_stream(((scenario_id as u64) << 32) | replicate as u64);
    rng
}

/// A 64-bit seed for one replicate's MCMC chain.
pub fn chain_seed(master: u64, design: u32, scenario_id: u32, replicate: u32) -> u64 {
    mix64(mix64(master ^ mix64(0x6d63_6d63_0000_0000 | design as u64)) ^ (((scenario_id as u64) << 32) | replicate as u64))
}
