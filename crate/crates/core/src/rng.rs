//! Counter-keyed random streams.
//!
//! A stream is identified by `(seed, stream_id)`. The stream id is derived
//! from a role tag and a key path such as `(generation, offspring_index)`,
//! so any worker can reconstruct the exact draws for a unit of work without
//! coordinating with the others. Draw `k` of a stream is the `k`-th output
//! of a ChaCha8 generator seeded with `seed` and positioned on `stream_id`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Logical role of a stream. Roles never share stream ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamRole {
    /// Genotypes drawn when the archive is empty.
    Initial = 1,
    /// Parent selection.
    Selection = 2,
    /// Variation operators.
    Mutation = 3,
    /// Offspring evaluation noise during training.
    Evaluation = 4,
    /// Archive-sampling reevaluation of occupants during training.
    Resample = 5,
    /// Post-hoc reevaluation for metrics. Disjoint from all training roles.
    Reevaluation = 6,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Stream for `role` at the given key path.
    pub fn keyed(seed: u64, role: StreamRole, key: &[u64]) -> Self {
        let mut id = splitmix64(role as u64);
        for &k in key {
            id = splitmix64(id ^ k.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        }
        Self::new(seed, id)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
