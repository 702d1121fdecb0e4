//! Class-balanced cross entropy over the two-channel probability map.

use super::tensor::{Scalar, Shape, Tensor};
use crate::{Error, Mask, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

/// Loss for one sample.
#[derive(Clone, Debug)]
pub struct LossTerms<T> {
    pub loss: f64,
    /// Fraction of non-ignored pixels that are background.
    pub beta: f64,
    /// Gradient with respect to the logits that produced `prob`.
    pub grad: Tensor<T>,
}

/// Loss for a mini-batch: per-sample losses averaged over the batch.
#[derive(Clone, Debug)]
pub struct BatchLoss<T> {
    pub loss: f64,
    pub betas: Vec<f64>,
    pub grad: Tensor<T>,
}

/// Weighted cross entropy
/// `-beta * sum_fg ln P(fg) - (1 - beta) * sum_bg ln P(bg)`, summed over the
/// non-ignored pixels of a single sample.
///
/// `label` holds 0 (background) or 1 (foreground); any nonzero `ignore` pixel
/// is excluded from both sums and from `beta`. Channel 0 of `prob` is the
/// background probability, channel 1 the foreground one.
pub fn balanced_ce_loss<T: Scalar>(prob: &Tensor<T>, label: &Mask, ignore: &Mask) -> Result<LossTerms<T>> {
    let s = prob.shape();
    if s.n != 1 || s.c != 2 {
        return Err(Error::Shape(format!(
            "balanced_ce_loss expects a (1, 2, h, w) probability map, got {s}"
        )));
    }
    if label.dims() != (s.w, s.h) || ignore.dims() != (s.w, s.h) {
        return Err(Error::Shape(format!(
            "label {}x{} / ignore {}x{} vs probability map {}x{}",
            label.width(),
            label.height(),
            ignore.width(),
            ignore.height(),
            s.w,
            s.h
        )));
    }
    let hw = s.plane();
    let (mut n_fg, mut n_bg) = (0usize, 0usize);
    for (&l, &ig) in label.data().iter().zip(ignore.data()) {
        if ig != 0 {
            continue;
        }
        match l {
            0 => n_bg += 1,
            1 => n_fg += 1,
            v => {
                return Err(Error::InvalidInput(format!(
                    "label value {v} outside {{0,1}} on a non-ignored pixel"
                )))
            }
        }
    }
    let total = n_fg + n_bg;
    let beta = if total == 0 { 1.0 } else { n_bg as f64 / total as f64 };
    let mut grad = Tensor::zeros(s);
    let p = prob.data();
    let mut loss = 0.0f64;
    if beta > 0.0 && beta < 1.0 {
        let g = grad.data_mut();
        let hi = 1.0 - PROB_CLAMP;
        for i in 0..hw {
            if ignore.data()[i] != 0 {
                continue;
            }
            let (p_bg, p_fg) = (p[i], p[hw + i]);
            if label.data()[i] == 1 {
                let v = p_fg.as_f64();
                loss -= beta * v.clamp(PROB_CLAMP, hi).ln();
                if (PROB_CLAMP..=hi).contains(&v) {
                    let w = T::from_f64(beta) * p_bg;
                    g[i] = w;
                    g[hw + i] = -w;
                }
            } else {
                let v = p_bg.as_f64();
                loss -= (1.0 - beta) * v.clamp(PROB_CLAMP, hi).ln();
                if (PROB_CLAMP..=hi).contains(&v) {
                    let w = T::from_f64(1.0 - beta) * p_fg;
                    g[i] = -w;
                    g[hw + i] = w;
                }
            }
        }
    }
    Ok(LossTerms { loss, beta, grad })
}

/// [`balanced_ce_loss`] applied per sample and averaged over the batch.
pub fn batch_balanced_ce_loss<T: Scalar>(
    prob: &Tensor<T>,
    labels: &[&Mask],
    ignores: &[&Mask],
) -> Result<BatchLoss<T>> {
    let s = prob.shape();
    if labels.len() != s.n || ignores.len() != s.n {
        return Err(Error::Shape(format!(
            "batch of {} probability maps with {} labels and {} ignore maps",
            s.n,
            labels.len(),
            ignores.len()
        )));
    }
    let one = Shape::new(1, s.c, s.h, s.w)?;
    let scale = T::from_f64(1.0 / s.n as f64);
    let mut grad = Tensor::zeros(s);
    let mut betas = Vec::with_capacity(s.n);
    let mut loss = 0.0;
    for n in 0..s.n {
        let sample = Tensor::from_vec(one, prob.sample(n).to_vec())?;
        let terms = balanced_ce_loss(&sample, labels[n], ignores[n])?;
        loss += terms.loss;
        betas.push(terms.beta);
        for (d, &g) in grad.sample_mut(n).iter_mut().zip(terms.grad.data()) {
            *d = g * scale;
        }
    }
    Ok(BatchLoss {
        loss: loss / s.n as f64,
        betas,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Plane;

    fn prob_map(p_fg: &[f64], w: usize, h: usize) -> Tensor<f64> {
        let mut data: Vec<f64> = p_fg.iter().map(|p| 1.0 - p).collect();
        data.extend_from_slice(p_fg);
        Tensor::from_vec(Shape::new(1, 2, h, w).unwrap(), data).unwrap()
    }

    #[test]
    fn one_fg_one_bg_at_half_gives_ln2() {
        let prob = prob_map(&[0.5, 0.5], 2, 1);
        let label = Plane::new(2, 1, vec![1, 0]).unwrap();
        let ignore = Plane::filled(2, 1, 0);
        let t = balanced_ce_loss(&prob, &label, &ignore).unwrap();
        assert_eq!(t.beta, 0.5);
        assert!((t.loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn single_class_label_gives_zero_loss() {
        let prob = prob_map(&[0.9, 0.2, 0.6, 0.01], 2, 2);
        let label = Plane::filled(2, 2, 0);
        let t = balanced_ce_loss(&prob, &label, &Plane::filled(2, 2, 0)).unwrap();
        assert_eq!(t.beta, 1.0);
        assert_eq!(t.loss, 0.0);
        assert!(t.grad.data().iter().all(|&g| g == 0.0));

        let all_fg = Plane::filled(2, 2, 1);
        let t = balanced_ce_loss(&prob, &all_fg, &Plane::filled(2, 2, 0)).unwrap();
        assert_eq!(t.beta, 0.0);
        assert_eq!(t.loss, 0.0);
    }

    #[test]
    fn ignored_pixels_leave_beta_and_loss() {
        let prob = prob_map(&[0.5, 0.5, 0.01], 3, 1);
        let label = Plane::new(3, 1, vec![1, 0, 7]).unwrap();
        let ignore = Plane::new(3, 1, vec![0, 0, 255]).unwrap();
        let t = balanced_ce_loss(&prob, &label, &ignore).unwrap();
        assert_eq!(t.beta, 0.5);
        assert!((t.loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(t.grad.at(0, 0, 0, 2), 0.0);
    }

    #[test]
    fn perfect_predictions_are_bounded_by_clamp() {
        let label = Plane::new(4, 1, vec![1, 0, 0, 1]).unwrap();
        let prob = prob_map(&[1.0, 0.0, 0.0, 1.0], 4, 1);
        let t = balanced_ce_loss(&prob, &label, &Plane::filled(4, 1, 0)).unwrap();
        assert!(t.loss >= 0.0);
        assert!(t.loss <= 4.0 * 2e-7);
    }

    #[test]
    fn rejects_bad_labels_and_shapes() {
        let prob = prob_map(&[0.5, 0.5], 2, 1);
        let bad = Plane::new(2, 1, vec![1, 2]).unwrap();
        assert!(balanced_ce_loss(&prob, &bad, &Plane::filled(2, 1, 0)).is_err());
        assert!(balanced_ce_loss(&prob, &Plane::filled(3, 1, 0), &Plane::filled(3, 1, 0)).is_err());
    }

    #[test]
    fn batch_loss_is_mean_of_samples() {
        let a = prob_map(&[0.5, 0.5], 2, 1);
        let b = prob_map(&[0.9, 0.3], 2, 1);
        let both = Tensor::stack(&[&a, &b]).unwrap();
        let la = Plane::new(2, 1, vec![1, 0]).unwrap();
        let lb = Plane::new(2, 1, vec![0, 1]).unwrap();
        let ig = Plane::filled(2, 1, 0);
        let ta = balanced_ce_loss(&a, &la, &ig).unwrap();
        let tb = balanced_ce_loss(&b, &lb, &ig).unwrap();
        let batch = batch_balanced_ce_loss(&both, &[&la, &lb], &[&ig, &ig]).unwrap();
        assert!((batch.loss - 0.5 * (ta.loss + tb.loss)).abs() < 1e-12);
        assert!((batch.grad.sample(1)[0] - 0.5 * tb.grad.data()[0]).abs() < 1e-12);
    }
}
