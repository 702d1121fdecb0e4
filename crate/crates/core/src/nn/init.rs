use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::{Scalar, Shape, Tensor};
use crate::{Error, Result};

/// Zero-mean normal weights with variance `2 / fan_in`, where `fan_in` is the
/// product of the last three dimensions.
pub fn he_init<T: Scalar>(dims: [usize; 4], seed: u64) -> Result<Tensor<T>> {
    he_init_with_fan_in(dims, dims[1] * dims[2] * dims[3], seed)
}

/// Same as [`he_init`] with an explicit fan-in (transposed convolutions see
/// only `cin` inputs per output pixel).
pub fn he_init_with_fan_in<T: Scalar>(dims: [usize; 4], fan_in: usize, seed: u64) -> Result<Tensor<T>> {
    let shape = Shape::new(dims[0], dims[1], dims[2], dims[3])?;
    if fan_in == 0 {
        return Err(Error::Shape("he_init: fan_in must be positive".into()));
    }
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..shape.numel())
        .map(|_| T::from_f64(normal.sample(&mut rng)))
        .collect();
    Tensor::from_vec(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_target_moments() {
        // fan_in = 4 * 3 * 3 = 36, 100_008 samples
        let t: Tensor<f64> = he_init([2778, 4, 3, 3], 7).unwrap();
        let n = t.len() as f64;
        let mean = t.data().iter().sum::<f64>() / n;
        let var = t.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let target = 2.0 / 36.0;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!(((var - target) / target).abs() < 0.05, "var {var}");
    }

    #[test]
    fn seeded() {
        let a: Tensor<f32> = he_init([3, 2, 3, 3], 1).unwrap();
        let b: Tensor<f32> = he_init([3, 2, 3, 3], 1).unwrap();
        let c: Tensor<f32> = he_init([3, 2, 3, 3], 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn empty_shape_is_an_error() {
        assert!(he_init::<f32>([0, 2, 3, 3], 1).is_err());
    }
}
