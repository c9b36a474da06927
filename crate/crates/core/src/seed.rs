//! Seed derivation.
//!
//! One root seed feeds every random stream in a run. A stream seed is
//! derived from `(root, label, index)` by folding the label bytes (FNV-1a)
//! and the index into the root, then passing the result through the
//! splitmix64 finalizer. Distinct labels give independent streams, and
//! indexing by episode lets a resumed run regenerate any episode's stream
//! without saving generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed for stream `label`, sub-stream `index`, under `root`.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    let a = splitmix64(root ^ fnv1a(label.as_bytes()));
    splitmix64(a ^ splitmix64(index.wrapping_mul(GOLDEN)))
}

pub fn stream_rng(root: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label, index))
}
