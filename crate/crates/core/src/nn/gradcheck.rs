//! Central-finite-difference verification of analytic gradients.
//!
//! All checks run in `f64`. The error for one element is
//! `|analytic - numeric| / max(1, |analytic|, |numeric|)`: relative for
//! gradients larger than one, absolute below that, so rounding noise on
//! near-zero gradients does not dominate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::*;
use super::loss::balanced_ce_loss;
use super::tensor::{Shape, Tensor};
use crate::{Error, Mask, Plane, Result};

pub const DEFAULT_EPS: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

/// Compares the analytic gradients returned by `f` against central
/// differences of its scalar value, over every element of every input, and
/// returns the worst error.
///
/// `f` maps the inputs to `(value, gradient per input)`.
pub fn grad_check<F>(f: F, inputs: &[Tensor<f64>], eps: f64) -> Result<f64>
where
    F: FnMut(&[Tensor<f64>]) -> Result<(f64, Vec<Tensor<f64>>)>,
{
    grad_check_sampled(f, inputs, eps, usize::MAX, 0)
}

/// Like [`grad_check`] but probes at most `per_input` randomly chosen
/// elements of each input.
pub fn grad_check_sampled<F>(mut f: F, inputs: &[Tensor<f64>], eps: f64, per_input: usize, seed: u64) -> Result<f64>
where
    F: FnMut(&[Tensor<f64>]) -> Result<(f64, Vec<Tensor<f64>>)>,
{
    let (value, grads) = f(inputs)?;
    if !value.is_finite() {
        return Err(Error::NonFinite("objective".into()));
    }
    if grads.len() != inputs.len() {
        return Err(Error::Shape(format!(
            "{} gradients for {} inputs",
            grads.len(),
            inputs.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    let mut worst = 0.0f64;
    for (i, grad) in grads.iter().enumerate() {
        if grad.shape() != inputs[i].shape() {
            return Err(Error::Shape(format!(
                "gradient {i} has shape {}, input has {}",
                grad.shape(),
                inputs[i].shape()
            )));
        }
        if !grad.all_finite() {
            return Err(Error::NonFinite(format!("analytic gradient {i}")));
        }
        let len = inputs[i].len();
        let positions: Vec<usize> = if per_input >= len {
            (0..len).collect()
        } else {
            (0..per_input).map(|_| rng.random_range(0..len)).collect()
        };
        for j in positions {
            let orig = inputs[i].data()[j];
            work[i].data_mut()[j] = orig + eps;
            let (plus, _) = f(&work)?;
            work[i].data_mut()[j] = orig - eps;
            let (minus, _) = f(&work)?;
            work[i].data_mut()[j] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!("perturbed objective, input {i}")));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(grad.data()[j], numeric));
        }
    }
    Ok(worst)
}

/// Uniform values in `[-1, 1)` from a seeded stream.
pub fn random_tensor(shape: Shape, rng: &mut impl Rng) -> Tensor<f64> {
    let data = (0..shape.numel()).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_vec(shape, data).expect("shape and data agree")
}

/// `sum(probe * y)`, the scalar used to check a layer with output `y`.
fn probe_value(probe: &Tensor<f64>, y: &Tensor<f64>) -> f64 {
    probe.data().iter().zip(y.data()).map(|(a, b)| a * b).sum()
}

/// One entry of [`layer_suite`].
#[derive(Clone, Debug)]
pub struct CheckReport {
    pub name: &'static str,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

fn shape(n: usize, c: usize, h: usize, w: usize) -> Shape {
    Shape::new(n, c, h, w).expect("static shape")
}

/// Gradient checks for every layer and for softmax + balanced loss, on seeded
/// random inputs.
pub fn layer_suite(seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = DEFAULT_EPS;
    let mut out = Vec::new();

    // conv2d, zero bias: bilinear, so the differences are exact up to rounding
    let x = random_tensor(shape(2, 2, 5, 4), &mut rng);
    let w = random_tensor(shape(3, 2, 3, 3), &mut rng);
    let probe = random_tensor(shape(2, 3, 5, 4), &mut rng);
    let zero = Tensor::vector(vec![0.0; 3])?;
    let err = grad_check(
        |v| {
            let y = conv2d(&v[0], &v[1], &zero)?;
            let g = conv2d_backward(&v[0], &v[1], &probe)?;
            Ok((probe_value(&probe, &y), vec![g.dx, g.dw]))
        },
        &[x.clone(), w.clone()],
        eps,
    )?;
    out.push(CheckReport { name: "conv2d (zero bias)", max_rel_err: err, tolerance: 1e-7 });

    let b = random_tensor(shape(3, 1, 1, 1), &mut rng);
    let err = grad_check(
        |v| {
            let y = conv2d(&v[0], &v[1], &v[2])?;
            let g = conv2d_backward(&v[0], &v[1], &probe)?;
            Ok((probe_value(&probe, &y), vec![g.dx, g.dw, g.db]))
        },
        &[x, w, b],
        eps,
    )?;
    out.push(CheckReport { name: "conv2d", max_rel_err: err, tolerance: 1e-4 });

    // relu away from the kink
    let xr = random_tensor(shape(1, 3, 4, 4), &mut rng).map(|v| if v >= 0.0 { v + 0.05 } else { v - 0.05 });
    let probe = random_tensor(xr.shape(), &mut rng);
    let err = grad_check(
        |v| {
            let y = relu(&v[0]);
            Ok((probe_value(&probe, &y), vec![relu_backward(&v[0], &probe)?]))
        },
        &[xr],
        eps,
    )?;
    out.push(CheckReport { name: "relu", max_rel_err: err, tolerance: 1e-4 });

    // maxpool on distinct values spaced far beyond eps
    let mut values: Vec<f64> = (0..2 * 2 * 4 * 6).map(|i| i as f64 * 0.01).collect();
    for i in (1..values.len()).rev() {
        values.swap(i, rng.random_range(0..=i));
    }
    let xp = Tensor::from_vec(shape(2, 2, 4, 6), values)?;
    let probe = random_tensor(shape(2, 2, 2, 3), &mut rng);
    let err = grad_check(
        |v| {
            let (y, idx) = maxpool2(&v[0])?;
            Ok((probe_value(&probe, &y), vec![maxpool2_backward(&probe, &idx)?]))
        },
        &[xp],
        eps,
    )?;
    out.push(CheckReport { name: "maxpool2", max_rel_err: err, tolerance: 1e-4 });

    // deconv2
    let xd = random_tensor(shape(2, 3, 3, 2), &mut rng);
    let wd = random_tensor(shape(3, 2, 2, 2), &mut rng);
    let probe = random_tensor(shape(2, 2, 6, 4), &mut rng);
    let zero = Tensor::vector(vec![0.0; 2])?;
    let err = grad_check(
        |v| {
            let y = deconv2(&v[0], &v[1], &zero)?;
            let g = deconv2_backward(&v[0], &v[1], &probe)?;
            Ok((probe_value(&probe, &y), vec![g.dx, g.dw]))
        },
        &[xd.clone(), wd.clone()],
        eps,
    )?;
    out.push(CheckReport { name: "deconv2 (zero bias)", max_rel_err: err, tolerance: 1e-7 });

    let bd = random_tensor(shape(2, 1, 1, 1), &mut rng);
    let err = grad_check(
        |v| {
            let y = deconv2(&v[0], &v[1], &v[2])?;
            let g = deconv2_backward(&v[0], &v[1], &probe)?;
            Ok((probe_value(&probe, &y), vec![g.dx, g.dw, g.db]))
        },
        &[xd, wd, bd],
        eps,
    )?;
    out.push(CheckReport { name: "deconv2", max_rel_err: err, tolerance: 1e-4 });

    // concat / split
    let a = random_tensor(shape(2, 2, 3, 3), &mut rng);
    let bb = random_tensor(shape(2, 1, 3, 3), &mut rng);
    let probe = random_tensor(shape(2, 3, 3, 3), &mut rng);
    let err = grad_check(
        |v| {
            let y = concat_channels(&v[0], &v[1])?;
            let (ga, gb) = split_channels(&probe, 2)?;
            Ok((probe_value(&probe, &y), vec![ga, gb]))
        },
        &[a, bb],
        eps,
    )?;
    out.push(CheckReport { name: "concat_channels", max_rel_err: err, tolerance: 1e-7 });

    // softmax alone
    let z = random_tensor(shape(2, 2, 3, 3), &mut rng).map(|v| 3.0 * v);
    let probe = random_tensor(z.shape(), &mut rng);
    let err = grad_check(
        |v| {
            let p = softmax_channels(&v[0])?;
            Ok((probe_value(&probe, &p), vec![softmax_channels_backward(&p, &probe)?]))
        },
        &[z],
        eps,
    )?;
    out.push(CheckReport { name: "softmax_channels", max_rel_err: err, tolerance: 1e-4 });

    // logits -> softmax -> class-balanced loss, with one ignored pixel
    let logits = random_tensor(shape(1, 2, 4, 4), &mut rng).map(|v| 2.0 * v);
    let mut labels: Vec<u8> = (0..16).map(|_| rng.random_range(0..2)).collect();
    labels[0] = 1;
    labels[1] = 0;
    let label = Plane::new(4, 4, labels)?;
    let mut ignore = Plane::filled(4, 4, 0);
    ignore.set(3, 3, 255);
    out.push(CheckReport {
        name: "softmax + balanced loss",
        max_rel_err: check_loss_pipeline(&logits, &label, &ignore, eps)?,
        tolerance: 1e-4,
    });
    Ok(out)
}

/// Gradient check of `balanced_ce_loss(softmax_channels(logits))` with
/// respect to the logits.
pub fn check_loss_pipeline(logits: &Tensor<f64>, label: &Mask, ignore: &Mask, eps: f64) -> Result<f64> {
    grad_check(
        |v| {
            let p = softmax_channels(&v[0])?;
            let terms = balanced_ce_loss(&p, label, ignore)?;
            Ok((terms.loss, vec![terms.grad]))
        },
        std::slice::from_ref(logits),
        eps,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for report in layer_suite(42).unwrap() {
            assert!(report.passed(), "{report:?}");
        }
    }

    #[test]
    fn suite_passes_for_other_seeds() {
        for seed in [1, 2, 3] {
            for report in layer_suite(seed).unwrap() {
                assert!(report.passed(), "seed {seed}: {report:?}");
            }
        }
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let x = Tensor::vector(vec![0.3, -0.2]).unwrap();
        let err = grad_check(
            |v| {
                let val: f64 = v[0].data().iter().map(|a| a * a).sum();
                Ok((val, vec![v[0].map(|a| 3.0 * a)]))
            },
            &[x],
            DEFAULT_EPS,
        )
        .unwrap();
        assert!(err > 0.1);
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let x = Tensor::vector(vec![1.0]).unwrap();
        let res = grad_check(|v| Ok((f64::NAN, vec![v[0].clone()])), &[x], DEFAULT_EPS);
        assert!(matches!(res, Err(Error::NonFinite(_))));
    }
}
