//! Seeded, platform-stable Gaussian sampling.
//!
//! All randomness in the simulator flows through [`GaussianSource`]: a
//! ChaCha20 stream (counter based, identical output on every platform for
//! a given seed) feeding a Box–Muller transform. Nothing ever reads entropy
//! from the environment.

use num_complex::Complex64 as C64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::f64::consts::TAU;

/// Standard normal deviates from a fixed seed.
pub struct GaussianSource {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianSource {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed), spare: None }
    }

    /// Uniform deviate in (0, 1]; never zero so the logarithm below is finite.
    fn open_uniform(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
    }

    /// One Box–Muller pair of independent standard normals.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.open_uniform();
        let u2 = self.open_uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = TAU * u2;
        (r * theta.cos(), r * theta.sin())
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (a, b) = self.normal_pair();
        self.spare = Some(b);
        a
    }

    /// Complex number with i.i.d. standard normal real and imaginary parts.
    pub fn complex_normal(&mut self) -> C64 {
        let re = self.normal();
        let im = self.normal();
        C64::new(re, im)
    }
}

/// Derive an independent child seed from a base seed and a task index
/// (splitmix64 finalizer). Used to give ensemble members and sweep points
/// their own streams without depending on scheduling order.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
