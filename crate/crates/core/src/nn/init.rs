use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{Element, Tensor};

/// Seeded generator used for every weight initialization.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn fan_in_uniform<E: Element>(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Tensor<E> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Tensor::from_fn(shape, |_| E::from_f64(rng.gen_range(-bound..=bound)))
}

/// Uniform in `[-scale, scale]`, for test inputs.
pub fn uniform<E: Element>(shape: &[usize], scale: f64, rng: &mut impl Rng) -> Tensor<E> {
    Tensor::from_fn(shape, |_| E::from_f64(rng.gen_range(-scale..=scale)))
}
