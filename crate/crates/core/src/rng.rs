//! Seeded, splittable random source.
//!
//! Every stochastic step in the crate draws from a [`RandomSource`]. The base
//! generator is ChaCha8 (`rand_chacha`). Child streams are keyed by
//! `splitmix64(parent_seed ^ fnv1a(label))`, so a child's output depends only
//! on the parent seed and the label, never on how much of any other stream
//! has been consumed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Seed used whenever the caller does not supply one.
pub const DEFAULT_SEED: u64 = 0x5EED_2021;

#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Independent child stream identified by `label`.
    pub fn derive(&self, label: &str) -> RandomSource {
        RandomSource::new(derive_seed(self.seed, label))
    }

    /// Child stream identified by `label` and an index, e.g. a record number.
    pub fn derive_indexed(&self, label: &str, index: u64) -> RandomSource {
        RandomSource::new(splitmix64(derive_seed(self.seed, label) ^ splitmix64(index)))
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        // 53 random mantissa bits, shifted by half an ulp away from 0.
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// One Laplace(0, scale) draw by inverting the CDF of a single uniform.
    pub fn laplace(&mut self, scale: f64) -> f64 {
        let u = self.open01() - 0.5;
        -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn gamma(&mut self, shape: f64, scale: f64) -> Result<f64> {
        let dist = Gamma::new(shape, scale)
            .map_err(|e| Error::param("gamma", format!("shape {shape}, scale {scale}: {e}")))?;
        Ok(dist.sample(&mut self.inner))
    }

    /// Uniform index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.open01()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// `n` i.i.d. Laplace(0, `scale`) samples.
pub fn laplace_sample(rng: &mut RandomSource, scale: f64, n: usize) -> Result<Vec<f64>> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::param("scale", format!("must be positive and finite, got {scale}")));
    }
    if n == 0 {
        return Err(Error::param("n", "sample count must be at least 1"));
    }
    Ok((0..n).map(|_| rng.laplace(scale)).collect())
}

/// Stable seed derivation; also used for sweep-cell seeds.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    splitmix64(seed ^ fnv1a(label.as_bytes()))
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}
