use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{backward, forward, forward_cached, NetConfig};
use crate::dataset::resize_mask_nn;
use crate::metrics::{gt_class, GtClass};
use crate::nn::{batch_balanced_ce_loss, softmax_channels, AdamConfig, AdamState, ParamStore, Shape, Tensor};
use crate::{Error, Mask, Plane, Result, BACKGROUND, FOREGROUND};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Samples whose labelled foreground fraction is below this are dropped.
    pub min_fg_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            epochs: 50,
            batch_size: 4,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            seed: 0,
            min_fg_fraction: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be at least 1".into()));
        }
        if self.lr.is_nan() || self.lr <= 0.0 || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam needs lr > 0 and betas in [0, 1)".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 || !(0.0..=1.0).contains(&self.min_fg_fraction) {
            return Err(Error::Config("epsilon must be positive and min_fg_fraction in [0, 1]".into()));
        }
        Ok(())
    }
}

/// One network input with its per-pixel target.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    /// Shape (1, N, s, s), values 0 or 1.
    pub input: Tensor<f32>,
    /// 1 for foreground, 0 for background.
    pub label: Mask,
    /// Nonzero where the pixel takes no part in the loss.
    pub ignore: Mask,
}

/// Resizes `masks` to the network input size and stacks them as channels
/// with values in {0, 1}.
pub fn masks_to_input(config: &NetConfig, masks: &[&Mask]) -> Result<Tensor<f32>> {
    config.validate()?;
    if masks.len() != config.input_channels {
        return Err(Error::Shape(format!(
            "network fuses {} masks, got {}",
            config.input_channels,
            masks.len()
        )));
    }
    let s = config.input_size;
    let mut data = Vec::with_capacity(masks.len() * s * s);
    for m in masks {
        if m.data().is_empty() {
            return Err(Error::InvalidInput("empty mask".into()));
        }
        m.ensure_binary("candidate mask")?;
        let r = resize_mask_nn(m, s, s)?;
        data.extend(r.data().iter().map(|&v| if v == FOREGROUND { 1.0 } else { 0.0 }));
    }
    Tensor::from_vec(Shape::new(1, masks.len(), s, s)?, data)
}

impl TrainingSample {
    /// Builds a sample from candidate masks and a ground-truth image in the
    /// CDnet encoding (plain binary masks are a subset of it).
    pub fn from_masks(config: &NetConfig, masks: &[&Mask], groundtruth: &Mask) -> Result<Self> {
        let input = masks_to_input(config, masks)?;
        let s = config.input_size;
        let gt = resize_mask_nn(groundtruth, s, s)?;
        let mut label = Plane::filled(s, s, 0);
        let mut ignore = Plane::filled(s, s, 0);
        for (i, &v) in gt.data().iter().enumerate() {
            match gt_class(v)? {
                GtClass::Positive => label.data_mut()[i] = 1,
                GtClass::Negative => {}
                GtClass::Ignored => ignore.data_mut()[i] = 1,
            }
        }
        Ok(Self { input, label, ignore })
    }

    /// Foreground and background pixel counts outside the ignore map.
    pub fn class_counts(&self) -> (usize, usize) {
        let mut fg = 0;
        let mut bg = 0;
        for (&l, &ig) in self.label.data().iter().zip(self.ignore.data()) {
            if ig == 0 {
                if l == 1 {
                    fg += 1;
                } else {
                    bg += 1;
                }
            }
        }
        (fg, bg)
    }

    fn check(&self, config: &NetConfig) -> Result<()> {
        let s = config.input_size;
        let want = Shape::new(1, config.input_channels, s, s)?;
        if self.input.shape() != want || self.label.dims() != (s, s) || self.ignore.dims() != (s, s) {
            return Err(Error::Shape(format!(
                "training sample {} does not match network input {want}",
                self.input.shape()
            )));
        }
        Ok(())
    }
}

/// Epoch-by-epoch training state.
pub struct Trainer {
    config: NetConfig,
    train: TrainConfig,
    params: ParamStore<f32>,
    adam: AdamState<f32>,
    samples: Vec<TrainingSample>,
    rng: ChaCha8Rng,
    history: Vec<f64>,
}

impl Trainer {
    /// Keeps only samples that have both classes and enough foreground.
    pub fn new(params: ParamStore<f32>, config: &NetConfig, samples: &[TrainingSample], train: &TrainConfig) -> Result<Self> {
        config.validate()?;
        train.validate()?;
        if samples.is_empty() {
            return Err(Error::InvalidInput("no training samples".into()));
        }
        let mut kept = Vec::new();
        for s in samples {
            s.check(config)?;
            let (fg, bg) = s.class_counts();
            if fg > 0 && bg > 0 && fg as f64 / (fg + bg) as f64 >= train.min_fg_fraction {
                kept.push(s.clone());
            }
        }
        if kept.is_empty() {
            return Err(Error::InvalidInput(format!(
                "all {} training samples were filtered out (single class or too little foreground)",
                samples.len()
            )));
        }
        Ok(Self {
            config: config.clone(),
            adam: AdamState::new(train.adam(), &params),
            train: train.clone(),
            params,
            samples: kept,
            rng: ChaCha8Rng::seed_from_u64(train.seed),
            history: Vec::new(),
        })
    }

    pub fn usable_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn params(&self) -> &ParamStore<f32> {
        &self.params
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn into_parts(self) -> (ParamStore<f32>, Vec<f64>) {
        (self.params, self.history)
    }

    /// One pass over the shuffled samples; returns the mean batch loss.
    pub fn run_epoch(&mut self) -> Result<f64> {
        let mut order: Vec<usize> = (0..self.samples.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(self.train.batch_size) {
            let inputs: Vec<&Tensor<f32>> = chunk.iter().map(|&i| &self.samples[i].input).collect();
            let batch = Tensor::stack(&inputs)?;
            let labels: Vec<&Mask> = chunk.iter().map(|&i| &self.samples[i].label).collect();
            let ignores: Vec<&Mask> = chunk.iter().map(|&i| &self.samples[i].ignore).collect();
            let (logits, cache) = forward_cached(&self.params, &self.config, &batch)?;
            let prob = softmax_channels(&logits)?;
            let loss = batch_balanced_ce_loss(&prob, &labels, &ignores)?;
            if !loss.loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {}", self.history.len())));
            }
            self.params.zero_grads();
            backward(&mut self.params, &self.config, &cache, &loss.grad)?;
            self.adam.step(&mut self.params)?;
            total += loss.loss;
            batches += 1;
        }
        let mean = total / batches as f64;
        self.history.push(mean);
        Ok(mean)
    }
}

/// Runs `train.epochs` epochs; returns the trained parameters and the mean
/// batch loss of every epoch.
pub fn train(
    params: ParamStore<f32>,
    config: &NetConfig,
    samples: &[TrainingSample],
    train: &TrainConfig,
) -> Result<(ParamStore<f32>, Vec<f64>)> {
    let mut t = Trainer::new(params, config, samples, train)?;
    for _ in 0..train.epochs {
        t.run_epoch()?;
    }
    Ok(t.into_parts())
}

/// Foreground where P(fg) > P(bg), first sample of the batch only. Ties go
/// to background.
pub fn mask_from_probs(prob: &Tensor<f32>) -> Result<Mask> {
    let s = prob.shape();
    if s.c != 2 {
        return Err(Error::Shape(format!("expected a two-channel probability map, got {s}")));
    }
    let (bg, fg) = (prob.plane(0, 0), prob.plane(0, 1));
    let data = bg
        .iter()
        .zip(fg)
        .map(|(b, f)| if f > b { FOREGROUND } else { BACKGROUND })
        .collect();
    Plane::new(s.w, s.h, data)
}

/// Fuses `masks` into one mask of size `out_size` (width, height).
pub fn predict_mask(params: &ParamStore<f32>, config: &NetConfig, masks: &[&Mask], out_size: (usize, usize)) -> Result<Mask> {
    let input = masks_to_input(config, masks)?;
    let prob = forward(params, config, &input)?;
    let m = mask_from_probs(&prob)?;
    resize_mask_nn(&m, out_size.0, out_size.1)
}
