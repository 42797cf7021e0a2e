//! Seeded Gaussian streams.
//!
//! Each Brownian motion draws from its own ChaCha8 stream: the generator is
//! seeded with `ChaCha8Rng::seed_from_u64(seed)` and then switched to
//! `set_stream(stream_id)`. Stream 0 is the common noise `W₀`, stream `i ≥ 1`
//! belongs to agent `i`.
//!
//! Normals come from the Box–Muller transform on pairs of 53-bit uniforms
//! `u = (next_u64 >> 11) · 2⁻⁵³`:
//!
//! ```text
//! r = sqrt(-2 ln(1 - u₁)),  z₀ = r cos(2π u₂),  z₁ = r sin(2π u₂)
//! ```
//!
//! `z₀` is returned first and `z₁` on the following call. Brownian increments
//! over a step `h` are `sqrt(h) · z`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream id reserved for the common noise.
pub const COMMON_STREAM: u64 = 0;

#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn next_uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

/// `count` Brownian increments of variance `h`.
pub fn increments(seed: u64, stream: u64, count: usize, h: f64) -> Vec<f64> {
    let mut g = GaussianStream::new(seed, stream);
    let scale = h.sqrt();
    (0..count).map(|_| scale * g.next_standard()).collect()
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of Monte-Carlo sample `s` in an experiment with `n` agents.
pub fn sample_seed(base: u64, n: usize, s: usize) -> u64 {
    base ^ splitmix64(splitmix64(n as u64) ^ s as u64)
}
