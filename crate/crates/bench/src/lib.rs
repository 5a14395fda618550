//! Fixtures shared by the benchmarks.

use loadsel_core::encode::REFERENCE_DEPTHS;
use loadsel_core::gp::TrainingSet;
use loadsel_core::pool::synthetic_cases;
use loadsel_core::Pool;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `n` uniform points in `[-1, 1]^d` with labels from a smooth function.
pub fn training_set(n: usize, d: usize, seed: u64) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0f64..1.0));
    let y = x.rows().into_iter().map(|r| r.sum().sin()).collect();
    TrainingSet::new(x, y).expect("consistent shapes")
}

/// The standard-sized synthetic pool.
pub fn pool(seed: u64) -> Pool {
    Pool::from_cases(&synthetic_cases(526, seed), &REFERENCE_DEPTHS).expect("valid synthetic pool")
}
