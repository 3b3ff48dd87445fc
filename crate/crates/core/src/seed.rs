//! Stable seed derivation. Seeds must not depend on the std hasher, whose
//! output is allowed to change between Rust releases.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for a named entity (a dataset) under a global seed.
pub(crate) fn for_name(global: u64, name: &str) -> u64 {
    mix(global ^ fnv1a(name.as_bytes()))
}

/// Seed for the `index`-th independent stream under a master seed.
pub(crate) fn for_index(master: u64, index: u64) -> u64 {
    mix(master.wrapping_add(mix(index.wrapping_add(0x9e37_79b9_7f4a_7c15))))
}
