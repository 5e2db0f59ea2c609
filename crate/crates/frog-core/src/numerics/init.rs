//! Seeded parameter initialization: uniform on ±√(6/fan_in) for weights,
//! zeros for biases. Samples are drawn in f64 and cast, so both precision
//! modes see the same underlying draw.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{real, Real, Tensor};

/// Weight tensor with entries uniform on [−√(6/fan_in), +√(6/fan_in)],
/// deterministic in `seed`.
pub fn init_params<T: Real>(rows: usize, cols: usize, fan_in: usize, seed: u64) -> Tensor<T> {
    assert!(fan_in >= 1, "fan_in must be at least 1");
    let bound = (6.0 / fan_in as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols)
        .map(|_| real::<T>((rng.gen::<f64>() * 2.0 - 1.0) * bound))
        .collect();
    Tensor::new(rows, cols, data)
}

/// Bias tensor: all zeros.
pub fn zeros<T: Real>(rows: usize, cols: usize) -> Tensor<T> {
    Tensor::zeros(rows, cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_tensor() {
        let a: Tensor<f64> = init_params(4, 7, 7, 99);
        let b: Tensor<f64> = init_params(4, 7, 7, 99);
        assert_eq!(a, b);
        let c: Tensor<f64> = init_params(4, 7, 7, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn fan_in_six_bounds_entries_by_one() {
        let t: Tensor<f64> = init_params(50, 50, 6, 3);
        assert!(t.as_slice().iter().all(|&x| (-1.0..=1.0).contains(&x)));
    }

    #[test]
    fn sample_mean_near_zero() {
        // 10^5 draws of a symmetric uniform: the mean estimator has standard
        // error bound/sqrt(3e5), far below the 0.01 tolerance for fan_in 6.
        let t: Tensor<f64> = init_params(1000, 100, 6, 17);
        let mean: f64 = t.as_slice().iter().sum::<f64>() / t.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn both_precisions_see_the_same_draw() {
        let a: Tensor<f64> = init_params(3, 3, 9, 5);
        let b: Tensor<f32> = init_params(3, 3, 9, 5);
        for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
            assert_eq!(x as f32, y);
        }
    }
}
