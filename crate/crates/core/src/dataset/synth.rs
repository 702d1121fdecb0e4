//! Synthetic scenes: rectangles bouncing over a textured, noisy background,
//! with exact ground truth and three corrupted copies of it standing in for
//! three background-subtraction algorithms with different error habits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Frame, Mask, Plane, Result, BACKGROUND, FOREGROUND};

/// Names of the simulated candidate streams, in order.
pub const CANDIDATE_NAMES: [&str; 3] = ["dilated", "eroded", "noisy"];

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectSpec {
    pub width: usize,
    pub height: usize,
    /// Top-left corner at frame 0.
    pub x: f64,
    pub y: f64,
    /// Pixels per frame.
    pub vx: f64,
    pub vy: f64,
    pub intensity: u8,
}

/// Error model applied to the ground truth, in order: dilation, erosion,
/// independent pixel flips, then whole-frame dropout (an all-background
/// mask).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corruption {
    pub dilate: usize,
    pub erode: usize,
    pub flip_prob: f64,
    pub dropout_prob: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub objects: Vec<ObjectSpec>,
    /// Standard deviation of per-frame Gaussian pixel noise.
    pub noise_sigma: f64,
    pub corruptions: [Corruption; 3],
    pub seed: u64,
}

impl SyntheticConfig {
    /// `count` objects with sizes, start positions, velocities and
    /// intensities drawn from `seed`; default corruptions.
    pub fn with_random_objects(width: usize, height: usize, frames: usize, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0B1E);
        let max_side = (width.min(height) / 4).max(3);
        let min_side = (max_side / 2).max(3);
        let objects = (0..count)
            .map(|_| {
                let w = rng.random_range(min_side..=max_side);
                let h = rng.random_range(min_side..=max_side);
                let speed = rng.random_range(0.6..1.8);
                let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                ObjectSpec {
                    width: w,
                    height: h,
                    x: rng.random_range(0.0..(width.saturating_sub(w) as f64 + 1.0)),
                    y: rng.random_range(0.0..(height.saturating_sub(h) as f64 + 1.0)),
                    vx: speed * angle.cos(),
                    vy: speed * angle.sin(),
                    intensity: if rng.random_bool(0.5) {
                        rng.random_range(180..=240)
                    } else {
                        rng.random_range(10..=50)
                    },
                }
            })
            .collect();
        Self {
            width,
            height,
            frames,
            objects,
            noise_sigma: 4.0,
            corruptions: default_corruptions(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.frames == 0 {
            return Err(Error::Config("synthetic video needs nonzero size and frame count".into()));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.width == 0 || o.height == 0 || o.width > self.width || o.height > self.height {
                return Err(Error::Config(format!(
                    "object {i} ({}x{}) does not fit in a {}x{} frame",
                    o.width, o.height, self.width, self.height
                )));
            }
        }
        for c in &self.corruptions {
            if !(0.0..=1.0).contains(&c.flip_prob) || !(0.0..=1.0).contains(&c.dropout_prob) {
                return Err(Error::Config("corruption probabilities must lie in [0, 1]".into()));
            }
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 {
            return Err(Error::Config("noise sigma must be non-negative".into()));
        }
        Ok(())
    }
}

/// Dilated by 2, eroded by 2, and 5% flips with 5% dropped frames.
pub fn default_corruptions() -> [Corruption; 3] {
    [
        Corruption { dilate: 2, ..Default::default() },
        Corruption { erode: 2, ..Default::default() },
        Corruption { flip_prob: 0.05, dropout_prob: 0.05, ..Default::default() },
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticVideo {
    pub frames: Vec<Frame>,
    pub groundtruth: Vec<Mask>,
    /// One stream per entry of [`CANDIDATE_NAMES`].
    pub candidates: [Vec<Mask>; 3],
}

/// Position along one axis with reflection at `0` and `span`.
fn bounce(start: f64, velocity: f64, t: usize, span: usize) -> usize {
    if span == 0 {
        return 0;
    }
    let span = span as f64;
    let p = (start + velocity * t as f64).rem_euclid(2.0 * span);
    let p = if p > span { 2.0 * span - p } else { p };
    (p.round() as usize).min(span as usize)
}

fn background_texture(x: usize, y: usize) -> f64 {
    let (xf, yf) = (x as f64, y as f64);
    100.0 + 30.0 * (xf * 0.21).sin() * (yf * 0.17).cos() + 12.0 * ((xf + yf) * 0.05).sin()
}

/// Stream-specific RNG so every frame is reproducible on its own.
fn frame_rng(seed: u64, frame: usize, stream: u64) -> ChaCha8Rng {
    let mut z = seed
        .wrapping_add((frame as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Morphological dilation with a `(2r+1)^2` square.
pub fn dilate(mask: &Mask, radius: usize) -> Mask {
    morph(mask, radius, true)
}

/// Morphological erosion with a `(2r+1)^2` square; pixels outside the image
/// count as background.
pub fn erode(mask: &Mask, radius: usize) -> Mask {
    morph(mask, radius, false)
}

fn morph(mask: &Mask, radius: usize, grow: bool) -> Mask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let r = radius as isize;
    Plane::from_fn(w, h, |x, y| {
        let mut any = false;
        let mut all = true;
        for dy in -r..=r {
            for dx in -r..=r {
                let (sx, sy) = (x as isize + dx, y as isize + dy);
                let fg = sx >= 0
                    && sy >= 0
                    && (sx as usize) < w
                    && (sy as usize) < h
                    && mask.get(sx as usize, sy as usize) == FOREGROUND;
                any |= fg;
                all &= fg;
            }
        }
        if (grow && any) || (!grow && all) {
            FOREGROUND
        } else {
            BACKGROUND
        }
    })
}

fn corrupt(gt: &Mask, c: &Corruption, rng: &mut ChaCha8Rng) -> Mask {
    let mut m = dilate(gt, c.dilate);
    m = erode(&m, c.erode);
    if c.flip_prob > 0.0 {
        for v in m.data_mut() {
            if rng.random_bool(c.flip_prob) {
                *v = FOREGROUND - *v;
            }
        }
    }
    if c.dropout_prob > 0.0 && rng.random_bool(c.dropout_prob) {
        m.data_mut().fill(BACKGROUND);
    }
    m
}

pub fn synth_generate(cfg: &SyntheticConfig) -> Result<SyntheticVideo> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let texture: Vec<f64> = (0..h).flat_map(|y| (0..w).map(move |x| background_texture(x, y))).collect();
    let noise = Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE)).map_err(|e| Error::Config(e.to_string()))?;
    let mut frames = Vec::with_capacity(cfg.frames);
    let mut groundtruth = Vec::with_capacity(cfg.frames);
    let mut candidates: [Vec<Mask>; 3] = Default::default();
    for t in 0..cfg.frames {
        let mut scene = texture.clone();
        let mut gt = Plane::filled(w, h, BACKGROUND);
        for o in &cfg.objects {
            let x0 = bounce(o.x, o.vx, t, w - o.width);
            let y0 = bounce(o.y, o.vy, t, h - o.height);
            for y in y0..y0 + o.height {
                for x in x0..x0 + o.width {
                    scene[y * w + x] = o.intensity as f64;
                    gt.set(x, y, FOREGROUND);
                }
            }
        }
        let mut rng = frame_rng(cfg.seed, t, 0);
        let pixels = scene
            .iter()
            .map(|&v| {
                let n = if cfg.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                (v + n).round().clamp(0.0, 255.0) as u8
            })
            .collect();
        frames.push(Plane::new(w, h, pixels)?);
        for (k, c) in cfg.corruptions.iter().enumerate() {
            let mut rng = frame_rng(cfg.seed, t, 1 + k as u64);
            candidates[k].push(corrupt(&gt, c, &mut rng));
        }
        groundtruth.push(gt);
    }
    Ok(SyntheticVideo {
        frames,
        groundtruth,
        candidates,
    })
}
