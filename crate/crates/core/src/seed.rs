//! Per-run, per-purpose random streams.
//!
//! Every stream is a ChaCha20 keystream keyed by the master seed; the stream
//! id mixes the run index with a purpose tag, so results never depend on how
//! runs are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Bath,
    Counts,
    Sse,
    Thinning,
    Paths,
}

impl Purpose {
    pub fn tag(self) -> &'static str {
        match self {
            Purpose::Bath => "bath",
            Purpose::Counts => "counts",
            Purpose::Sse => "sse",
            Purpose::Thinning => "thin",
            Purpose::Paths => "paths",
        }
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(master_seed: u64, run_index: u64, purpose: Purpose) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(splitmix(run_index ^ splitmix(fnv1a(purpose.tag()))));
    rng
}

/// Seed for sweep point `index`; point 0 reuses the master seed.
pub fn point_seed(master_seed: u64, index: usize) -> u64 {
    master_seed.wrapping_add(index as u64)
}
