//! Seed handling.
//!
//! Every run takes a single user-supplied 64-bit seed. Components never share
//! a generator; each one derives its own stream seed by mixing the master
//! seed with a component label through SplitMix64, then seeds a ChaCha8
//! generator from it. A port to another language reproduces the *streams*
//! by re-deriving the stream seeds, not by matching ChaCha output bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// One SplitMix64 step: advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the label bytes; stable across platforms and releases.
fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Stream seed for a named component (`"init"`, `"shuffle"`, `"walk"`, ...).
pub fn stream_seed(master: u64, label: &str) -> u64 {
    let mut state = master ^ label_hash(label);
    splitmix64(&mut state);
    splitmix64(&mut state)
}

/// Generator for a named component of a run seeded with `master`.
pub fn stream(master: u64, label: &str) -> Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, label))
}
