//! Seeded initialization helpers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor2;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Xavier/Glorot uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
pub fn xavier_uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor2 {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let mut t = Tensor2::zeros(rows, cols);
    for v in t.data_mut() {
        *v = rng.gen_range(-a..a);
    }
    t
}

/// One standard normal draw via Box-Muller; two uniforms per call keeps the
/// rng stream position deterministic.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Fill a vector with standard normal draws.
pub fn normal_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| standard_normal(rng)).collect()
}
