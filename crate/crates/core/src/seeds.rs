//! Sub-seed derivation. Every random stage draws its seed as
//! `derive(master, tag, index)`: the tag is hashed with 64-bit FNV-1a, mixed
//! into the master seed with SplitMix64, offset by the index and mixed again.
//! Any stage can therefore be rerun on its own from the master seed.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(master: u64, tag: &str, index: u64) -> u64 {
    let h = tag
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME));
    splitmix64(splitmix64(master ^ h).wrapping_add(index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_and_indices_separate_streams() {
        assert_ne!(derive(42, "scene", 0), derive(42, "masks", 0));
        assert_ne!(derive(42, "scene", 0), derive(42, "scene", 1));
        assert_eq!(derive(42, "scene", 3), derive(42, "scene", 3));
    }
}
