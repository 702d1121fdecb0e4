//! Adaptive mixture of Gaussians per pixel.

use super::{check_dims, BackgroundModel};
use crate::{Error, Frame, Mask, Plane, Result, BACKGROUND, FOREGROUND};

#[derive(Clone, Debug, PartialEq)]
pub struct GmmParams {
    /// Components per pixel.
    pub components: usize,
    /// Learning rate once the warm-up is over.
    pub alpha: f32,
    /// Match threshold in standard deviations.
    pub lambda: f32,
    /// Fraction of total weight explained by the background components.
    pub background_ratio: f32,
    pub variance_floor: f32,
    /// Variance given to a freshly created component.
    pub initial_variance: f32,
}

impl Default for GmmParams {
    fn default() -> Self {
        Self {
            components: 5,
            alpha: 0.01,
            lambda: 2.5,
            background_ratio: 0.7,
            variance_floor: 4.0,
            initial_variance: 225.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Component {
    weight: f32,
    mean: f32,
    variance: f32,
}

impl Component {
    fn rank_key(&self) -> f32 {
        if self.weight <= 0.0 {
            0.0
        } else {
            self.weight / self.variance.sqrt()
        }
    }
}

/// Per pixel, `components` Gaussians kept sorted by `weight / sigma`.
///
/// The effective learning rate is `max(alpha, 1 / t)` at frame `t`, so the
/// first frames are averaged instead of being absorbed at rate `alpha`.
/// This clears ghosts left by objects present in the first frame.
pub struct GmmModel {
    width: usize,
    height: usize,
    params: GmmParams,
    mixtures: Vec<Component>,
    frames_seen: u64,
}

impl GmmModel {
    pub fn new(width: usize, height: usize, params: GmmParams) -> Result<Self> {
        if params.components == 0 {
            return Err(Error::Config("gmm needs at least one component".into()));
        }
        if !(params.alpha > 0.0 && params.alpha <= 1.0) {
            return Err(Error::Config(format!("gmm alpha must be in (0, 1], got {}", params.alpha)));
        }
        if params.variance_floor <= 0.0 || params.initial_variance < params.variance_floor {
            return Err(Error::Config("gmm variances must be positive and >= floor".into()));
        }
        Ok(Self {
            width,
            height,
            mixtures: vec![Component::default(); width * height * params.components],
            params,
            frames_seen: 0,
        })
    }

    /// Sum of component weights at a pixel.
    pub fn weight_sum(&self, x: usize, y: usize) -> f32 {
        self.pixel(x, y).iter().map(|c| c.weight).sum()
    }

    /// Smallest variance among the live components at a pixel.
    pub fn min_variance(&self, x: usize, y: usize) -> f32 {
        self.pixel(x, y)
            .iter()
            .filter(|c| c.weight > 0.0)
            .map(|c| c.variance)
            .fold(f32::INFINITY, f32::min)
    }

    fn pixel(&self, x: usize, y: usize) -> &[Component] {
        let k = self.params.components;
        let i = y * self.width + x;
        &self.mixtures[i * k..(i + 1) * k]
    }

    fn update_pixel(p: &GmmParams, mix: &mut [Component], v: f32, rate: f32) -> bool {
        let lambda2 = p.lambda * p.lambda;
        let matched = mix
            .iter()
            .position(|c| c.weight > 0.0 && (v - c.mean).powi(2) < lambda2 * c.variance);
        let slot = match matched {
            Some(k) => {
                for (j, c) in mix.iter_mut().enumerate() {
                    let hit = if j == k { 1.0 } else { 0.0 };
                    c.weight = (1.0 - rate) * c.weight + rate * hit;
                }
                let c = &mut mix[k];
                let d = v - c.mean;
                c.mean += rate * d;
                c.variance = (c.variance + rate * (d * d - c.variance)).max(p.variance_floor);
                k
            }
            None => {
                // the last slot is the weakest (or unused) component
                let last = mix.len() - 1;
                let w = if mix.iter().all(|c| c.weight <= 0.0) { 1.0 } else { rate };
                mix[last] = Component {
                    weight: w,
                    mean: v,
                    variance: p.initial_variance,
                };
                last
            }
        };
        let total: f32 = mix.iter().map(|c| c.weight).sum();
        for c in mix.iter_mut() {
            c.weight /= total;
        }
        let tagged = mix[slot];
        mix.sort_by(|a, b| b.rank_key().total_cmp(&a.rank_key()));
        if matched.is_none() {
            return false;
        }
        let rank = mix.iter().position(|c| *c == tagged).expect("component survives sorting");
        let mut cumulative = 0.0;
        for c in mix.iter().take(rank) {
            cumulative += c.weight;
            if cumulative > p.background_ratio {
                return false;
            }
        }
        true
    }
}

impl BackgroundModel for GmmModel {
    fn step(&mut self, frame: &Frame) -> Result<Mask> {
        check_dims(frame, self.width, self.height)?;
        self.frames_seen += 1;
        let rate = self.params.alpha.max(1.0 / self.frames_seen as f32);
        let k = self.params.components;
        let mut out = Vec::with_capacity(frame.len());
        for (i, &v) in frame.data().iter().enumerate() {
            let mix = &mut self.mixtures[i * k..(i + 1) * k];
            let first = mix[0].weight <= 0.0;
            let background = Self::update_pixel(&self.params, mix, v as f32, rate);
            out.push(if background || first { BACKGROUND } else { FOREGROUND });
        }
        Plane::new(self.width, self.height, out)
    }
}
