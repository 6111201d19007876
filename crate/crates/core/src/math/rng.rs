//! SplitMix64: a counter-based 64-bit generator with a fixed, published
//! output function. Identical seeds give identical streams on every target.

use thiserror::Error;

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Error, PartialEq)]
#[error("invalid range [{lo}, {hi}]")]
pub struct RngError {
    pub lo: f64,
    pub hi: f64,
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `index`-th independent child stream of `base_seed`.
pub fn child_seed(base_seed: u64, index: u64) -> u64 {
    mix64(base_seed ^ mix64(index.wrapping_add(1).wrapping_mul(GAMMA)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    seed: u64,
    counter: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; returns `lo` for a degenerate range.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64, RngError> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(RngError { lo, hi });
        }
        if lo == hi {
            return Ok(lo);
        }
        loop {
            let v = lo + (hi - lo) * self.next_f64();
            // rounding can land exactly on hi
            if v < hi {
                return Ok(v);
            }
        }
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// Fisher-Yates permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i as u64 + 1) as usize;
            p.swap(i, j);
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_stream() {
        // First outputs of the reference SplitMix64 for seed 0.
        let mut r = Rng::new(0);
        assert_eq!(r.next_u64(), 0xe220_a839_7b1d_cdaf);
        assert_eq!(r.next_u64(), 0x6e78_9e6a_a1b9_65f4);
    }

    #[test]
    fn degenerate_range() {
        let mut r = Rng::new(3);
        assert_eq!(r.uniform(2.5, 2.5).unwrap(), 2.5);
    }

    #[test]
    fn inverted_range_is_an_error() {
        assert_eq!(Rng::new(1).uniform(1.0, 0.0), Err(RngError { lo: 1.0, hi: 0.0 }));
    }

    #[test]
    fn counter_advances() {
        let mut r = Rng::new(1);
        let a = r.uniform(0.0, 1.0).unwrap();
        let b = r.uniform(0.0, 1.0).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn equal_seeds_equal_streams() {
        let mut a = Rng::new(99);
        let mut b = Rng::new(99);
        for _ in 0..10_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn mean_of_unit_draws() {
        let mut r = Rng::new(5);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = r.uniform(0.0, 1.0).unwrap();
            assert!((0.0..1.0).contains(&x));
            sum += x;
        }
        assert!((sum / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut p = Rng::new(8).permutation(100);
        p.sort_unstable();
        assert_eq!(p, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn children_differ() {
        assert_ne!(child_seed(7, 0), child_seed(7, 1));
        assert_ne!(child_seed(7, 0), child_seed(8, 0));
    }
}
