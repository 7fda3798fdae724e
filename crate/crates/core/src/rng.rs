//! Seedable random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream keyed by
//! `(seed, stream)`. Model files only store the seed, so the generator and the
//! Gaussian transform below are part of the on-disk format: changing either
//! invalidates saved models (the frequency checksum catches this).
//!
//! Normal variates use the Marsaglia polar method. Each call to
//! [`NormalSampler::sample`] consumes uniforms from the underlying stream in a
//! fixed order, so a stream always yields the same sequence.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Well-known stream identifiers so that unrelated consumers of one seed do
/// not overlap. Frequency row `j` uses stream `j` directly.
pub mod streams {
    pub const FREQUENCY_BASE: u64 = 0;
    pub const DATA: u64 = 1 << 40;
    pub const NOISE: u64 = (1 << 40) + 1;
    pub const PARAMS: u64 = (1 << 40) + 2;
    pub const SHUFFLE: u64 = (1 << 40) + 3;
    pub const SPLIT: u64 = (1 << 40) + 4;
    pub const MONTE_CARLO: u64 = (1 << 40) + 5;
    pub const PAIRS: u64 = (1 << 40) + 6;
    pub const COUPLING: u64 = (1 << 40) + 7;
}

/// Independent generator for substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a seed with an index into a new seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard normal sampler (Marsaglia polar method) over any RNG.
pub struct NormalSampler<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: RngCore> NormalSampler<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.rng.random::<f64>() - 1.0;
            let v = 2.0 * self.rng.random::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let scale = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * scale);
                return u * scale;
            }
        }
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.sample();
        }
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}

/// Uniform draw in `[lo, hi)`.
pub fn uniform<R: RngCore>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Fisher-Yates permutation of `0..n`.
pub fn permutation<R: RngCore>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
