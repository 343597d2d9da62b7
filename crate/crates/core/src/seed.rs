//! Labelled seed derivation.
//!
//! Every random stage draws its seed as `derive_seed(master, label)`: the
//! label's FNV-1a hash is XORed into the master seed and the result is passed
//! through the SplitMix64 finalizer. Labels in use:
//!
//! | label                    | consumer                          |
//! |--------------------------|-----------------------------------|
//! | `folds`                  | cross-validation shuffle          |
//! | `user-sample`            | optional user subsampling         |
//! | `<algorithm>/fold<k>`    | model initialization in fold `k`  |
//! | `candidates/fold<k>`     | candidate-pool subsampling        |

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(label: &str) -> u64 {
    label
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, label: &str) -> u64 {
    splitmix64(master ^ fnv1a(label))
}
