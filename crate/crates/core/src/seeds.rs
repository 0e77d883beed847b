//! Seed derivation.
//!
//! Every random stream in a run descends from one root seed through a
//! labelled tree:
//!
//! ```text
//! root
//! ├── "synth"                     synthetic data generator
//! ├── "cv" / cv.seed              fold shuffling
//! ├── "background"                SHAP background subsampling
//! └── "model/<id>/<test_months>"  one node per fitted model (refit seed)
//!     ├── "fold" / f              model fitted on CV fold f
//!     ├── "candidate" / i         ARIMA candidate order i
//!     │   └── "arima" / k         multistart perturbation k
//!     ├── "forest" / i            bootstrap + feature sampling of tree i
//!     └── "boost" / t             row/column subsampling of round t
//! ```
//!
//! A child seed is `mix(parent, fnv1a(label), index)`, so a stream never
//! depends on how many draws a sibling consumed or on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derives the child seed for `(label, index)` under `parent`.
pub fn derive(parent: u64, label: &str, index: u64) -> u64 {
    splitmix(splitmix(parent ^ fnv1a(label)).wrapping_add(splitmix(index)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
