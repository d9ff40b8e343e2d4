//! Named random substreams derived from one master seed.
//!
//! Every consumer of randomness (weight initialization, spike sampling per
//! circuit, stimulus encoding per input field, tie-breaks) draws from its own
//! ChaCha stream selected by a label, so enabling or disabling one part of a
//! run never shifts the numbers seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream_id(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn named_rng(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(label));
    rng
}
