//! Deterministic seed derivation.
//!
//! Every run owns a base seed. Independent random streams (the optimizer's
//! own draws, the environment start state of the i-th episode, the trials of
//! a solved check) are derived from it with a SplitMix64 mix so that two
//! algorithms sharing a seed also share their episode start states.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random source used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Stream tags that keep derived seeds apart.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Optimizer = 0x6f70_7469,
    Episode = 0x6570_6973,
    SolvedCheck = 0x736f_6c76,
    InputVector = 0x696e_7076,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed, a stream tag and an index into a new seed.
pub fn derive(base: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(base ^ (stream as u64).rotate_left(32));
    splitmix64(a ^ splitmix64(index))
}

pub fn rng_for(base: u64, stream: Stream, index: u64) -> Rng {
    Rng::seed_from_u64(derive(base, stream, index))
}
