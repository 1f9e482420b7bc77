//! Seed splitting.
//!
//! Every random draw in a run descends from one root seed. A component asks
//! for `derive(root, stream, index)`: the stream name is hashed with FNV-1a,
//! mixed into the root, offset by the index, and finalized with SplitMix64.
//! Streams in use:
//!
//! | stream       | index            | consumer                           |
//! |--------------|------------------|------------------------------------|
//! | `generator`  | iteration·8+try  | topology proposal tie-breaking     |
//! | `optimizer`  | iteration        | logit jitter (when enabled)        |
//! | `ablation`   | mode position    | reserved; ablation shares one seed |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_GENERATOR: &str = "generator";
pub const STREAM_OPTIMIZER: &str = "optimizer";

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(root: u64, stream: &str, index: u64) -> u64 {
    splitmix64(splitmix64(root ^ fnv1a(stream)).wrapping_add(index))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
