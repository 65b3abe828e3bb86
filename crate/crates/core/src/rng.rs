//! Seeded random number generation.
//!
//! Every stochastic component draws from [`Rng`], a xoshiro256** generator
//! whose 256-bit state is expanded from a 64-bit seed with splitmix64.
//!
//! Substreams are derived by jumping: [`Rng::fork`] hands out a copy of the
//! current state and then advances `self` by 2^128 steps, so the k-th fork of
//! a generator is its state after k jumps. [`Rng::stream`] is shorthand for
//! "seed, then take the k-th fork". Streams never overlap for any realistic
//! number of draws.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand::{RngCore, SeedableRng};
use rand_distr::{Distribution, LogNormal, Poisson, StandardNormal};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rng {
    inner: Xoshiro256StarStar,
}

impl Rng {
    pub fn seed_from(seed: u64) -> Self {
        Self {
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    /// Substream `k` of `seed`: the generator seeded with `seed` after `k` jumps.
    pub fn stream(seed: u64, k: u64) -> Self {
        let mut rng = Self::seed_from(seed);
        for _ in 0..k {
            rng.inner.jump();
        }
        rng
    }

    /// Returns the current state as an independent generator and jumps `self`
    /// past it.
    pub fn fork(&mut self) -> Rng {
        let out = self.clone();
        self.inner.jump();
        out
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        self.inner.gen_range(0..n as u64) as usize
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn poisson(&mut self, lambda: f64) -> u64 {
        if lambda <= 0.0 {
            return 0;
        }
        let dist = Poisson::new(lambda).expect("positive finite lambda");
        let draw: f64 = dist.sample(&mut self.inner);
        draw as u64
    }

    pub fn log_normal(&mut self, mu: f64, sigma: f64) -> f64 {
        LogNormal::new(mu, sigma)
            .expect("finite log-normal parameters")
            .sample(&mut self.inner)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::seed_from(7);
        let mut b = Rng::seed_from(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn forks_match_stream_rule() {
        let mut base = Rng::seed_from(11);
        let f0 = base.fork();
        let f1 = base.fork();
        assert_eq!(f0, Rng::stream(11, 0));
        assert_eq!(f1, Rng::stream(11, 1));
        assert_ne!(f0, f1);
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut rng = Rng::seed_from(3);
        for _ in 0..1000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn poisson_zero_rate_is_zero() {
        let mut rng = Rng::seed_from(1);
        assert_eq!(rng.poisson(0.0), 0);
    }
}
