//! Addressable random streams.
//!
//! A stream is identified by `(seed, path)`. Its key is a SplitMix64 hash chain
//! over the seed and every path component, and the draws come from a ChaCha8
//! keystream under that key. Children are derived from the address alone, so a
//! child never depends on how many values the parent has produced.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_key(seed: u64, path: &[u64]) -> [u8; 32] {
    let mut state = mix64(seed.wrapping_add(GOLDEN_GAMMA));
    for (depth, &index) in path.iter().enumerate() {
        let tag = mix64(index.wrapping_add(GOLDEN_GAMMA.wrapping_mul(depth as u64 + 2)));
        state = mix64(state ^ tag);
    }
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        let word = mix64(state.wrapping_add(GOLDEN_GAMMA.wrapping_mul(i as u64 + 1)));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    key
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    path: Vec<u64>,
    rng: ChaCha8Rng,
}

impl PartialEq for RngStream {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.path == other.path && self.rng == other.rng
    }
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::at(seed, Vec::new())
    }

    pub fn at(seed: u64, path: Vec<u64>) -> Self {
        let rng = ChaCha8Rng::from_seed(derive_key(seed, &path));
        Self { seed, path, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Child stream at `path ++ [index]`, starting from its first draw.
    pub fn split(&self, index: u64) -> RngStream {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(index);
        Self::at(self.seed, path)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[low, high)`; returns `low` when the range is empty.
    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index range must be non-empty");
        self.rng.random_range(0..n)
    }

    pub fn bernoulli(&mut self, probability: f64) -> bool {
        self.uniform() < probability
    }

    pub fn beta(&mut self, alpha: f64) -> Result<f64> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta alpha must be positive and finite, got {alpha}"
            )));
        }
        let dist = Beta::new(alpha, alpha)
            .map_err(|e| Error::InvalidParameter(format!("beta({alpha}, {alpha}): {e}")))?;
        Ok(dist.sample(&mut self.rng))
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }
}

pub fn split_stream(parent: &RngStream, child_index: u64) -> RngStream {
    parent.split(child_index)
}

pub fn draw_uniform(stream: &mut RngStream) -> f64 {
    stream.uniform()
}

pub fn draw_beta(stream: &mut RngStream, alpha: f64) -> Result<f64> {
    stream.beta(alpha)
}
