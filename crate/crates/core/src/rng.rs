//! Counter-based deterministic randomness.
//!
//! Every random draw is a pure function of `(seed, stream ids...)`, so the
//! value of "the u-th edge variable in the s-th percolation sample" does not
//! depend on evaluation order or thread count. The mixer is the splitmix64
//! finalizer, applied once per key component.

const GOLDEN: u64 = 0x9e3779b97f4a7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Hashes a key vector into 64 uniform bits.
///
/// Components are absorbed sequentially; each absorption perturbs the state
/// by a distinct odd constant before mixing, so `keyed(s, &[a, b])` and
/// `keyed(s, &[b, a])` disagree.
pub fn keyed(seed: u64, key: &[u64]) -> u64 {
    let mut state = mix(seed ^ GOLDEN);
    for (i, &k) in key.iter().enumerate() {
        state = mix(state ^ k.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1)));
    }
    state
}

/// Uniform f64 in [0, 1) from the top 53 bits.
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// The u01 variable attached to key `(seed, key...)`.
pub fn keyed_unit(seed: u64, key: &[u64]) -> f64 {
    unit_f64(keyed(seed, key))
}

/// Sequential PRNG for consumers that want a stream rather than a keyed
/// lookup (simulated annealing proposals). Still reproducible: the stream
/// is a function of its construction key.
#[derive(Debug, Clone)]
pub struct StreamRng {
    state: u64,
}

impl StreamRng {
    pub fn new(seed: u64, key: &[u64]) -> Self {
        StreamRng {
            state: keyed(seed, key),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    pub fn next_unit(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    /// Uniform draw from [0, n). n = 0 returns 0.
    pub fn next_below(&mut self, n: usize) -> usize {
        if n == 0 {
            return 0;
        }
        // 128-bit multiply avoids the modulo bias for small n.
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}
