//! Counter-based random number generation.
//!
//! Every pricing problem draws from its own substream, keyed by the
//! problem seed and id, so results do not depend on the order in which
//! jobs are dispatched. A draw is addressed by a plain `u64` counter
//! (`path * stride + offset` in the Monte Carlo engines), which makes the
//! whole stream random access and bitwise reproducible across platforms.

use crate::math::norm_inv;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer: full-avalanche mixing of a 64-bit word.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z
}

/// FNV-1a hash of a byte string, used to key per-problem substreams.
#[inline]
pub fn hash_id(id: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in id.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// One independent random substream.
#[derive(Clone, Copy, Debug)]
pub struct Stream {
    key: u64,
}

impl Stream {
    /// Substream for a (seed, problem id) pair.
    pub fn for_problem(seed: u64, id: &str) -> Self {
        Stream {
            key: mix64(seed ^ hash_id(id).rotate_left(17)),
        }
    }

    /// Substream from a raw key, for tests and auxiliary sampling.
    pub fn from_key(key: u64) -> Self {
        Stream { key: mix64(key) }
    }

    /// The `ctr`-th raw 64-bit word of the stream.
    #[inline]
    pub fn word(&self, ctr: u64) -> u64 {
        mix64(self.key.wrapping_add(ctr.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform draw in the open interval (0, 1).
    #[inline]
    pub fn uniform(&self, ctr: u64) -> f64 {
        // 53 significant bits, offset by half a ulp so 0 and 1 are excluded.
        ((self.word(ctr) >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal draw via the inverse CDF.
    #[inline]
    pub fn normal(&self, ctr: u64) -> f64 {
        norm_inv(self.uniform(ctr))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_deterministic() {
        let a = Stream::for_problem(42, "VanillaCall_0001");
        let b = Stream::for_problem(42, "VanillaCall_0001");
        for ctr in 0..32 {
            assert_eq!(a.word(ctr), b.word(ctr));
        }
    }

    #[test]
    fn distinct_ids_give_distinct_streams() {
        let a = Stream::for_problem(42, "VanillaCall_0001");
        let b = Stream::for_problem(42, "VanillaCall_0002");
        let same = (0..64).filter(|&c| a.word(c) == b.word(c)).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn uniform_is_in_open_unit_interval() {
        let s = Stream::from_key(7);
        for ctr in 0..10_000 {
            let u = s.uniform(ctr);
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn normal_moments_are_sane() {
        let s = Stream::from_key(123);
        let n = 200_000u64;
        let (mut sum, mut sumsq) = (0.0f64, 0.0f64);
        for ctr in 0..n {
            let z = s.normal(ctr);
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean={mean}");
        assert!((var - 1.0).abs() < 0.02, "var={var}");
    }
}
