use rand::{Rng as _, SeedableRng};

use super::Tensor;
use crate::scalar::Scalar;

/// Counter-based ChaCha8 stream; identical seeds give identical streams on every
/// platform.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// `rows×cols` matrix drawn uniformly from `±sqrt(6/(rows+cols))`.
pub fn glorot_init<T: Scalar>(rows: usize, cols: usize, rng: &mut Rng) -> Tensor<T> {
    let bound = (6.0 / (rows + cols).max(1) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| T::lit(rng.random_range(-bound..bound)))
        .collect();
    Tensor::new(vec![rows, cols], data).expect("glorot shape")
}
