//! Deterministic sub-seed derivation so that every stage draws from its own
//! reproducible stream regardless of how much another stage consumed.

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the `index`-th draw of the named `stream` under `base`.
pub fn derive(base: u64, stream: &str, index: u64) -> u64 {
    let mut h = mix(base);
    for b in stream.bytes() {
        h = mix(h ^ b as u64);
    }
    mix(h ^ index.wrapping_mul(0x2545_f491_4f6c_dd1d))
}
