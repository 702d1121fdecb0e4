//! WebAssembly bindings for the static demo page in `www/`.
//!
//! The page drives a [`Demo`]: it builds a synthetic scene, runs the three
//! background-subtraction generators with adjustable sensitivity and fuses
//! their masks by majority vote or a boolean expression, scoring each
//! stream against the exact ground truth.

use wasm_bindgen::prelude::*;

use fuselab::baselines::{eval_expr, majority_vote, parse_expr, MaskSet};
use fuselab::bgs::{run_bgs, Algorithm, BgsParams};
use fuselab::dataset::{synth_generate, SyntheticConfig, SyntheticVideo};
use fuselab::metrics::{confusion, metrics_from_counts, ConfusionCounts};
use fuselab::{Mask, Plane, Result};

/// Stream names usable in fusion expressions.
pub const STREAMS: [&str; 3] = ["gmm", "sc", "median"];

#[wasm_bindgen]
pub struct Demo {
    video: SyntheticVideo,
    seed: u64,
    generated: [Option<Vec<Mask>>; 3],
    fused: Option<Vec<Mask>>,
}

fn js(e: fuselab::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn stream_index(name: &str) -> Option<usize> {
    STREAMS.iter().position(|s| *s == name)
}

fn gray_rgba(p: &Plane) -> Vec<u8> {
    p.data().iter().flat_map(|&v| [v, v, v, 255]).collect()
}

/// Foreground pixels: white where correct, red for false positives, blue
/// for misses; background stays black.
fn mask_rgba(mask: &Mask, gt: &Mask) -> Vec<u8> {
    mask.data()
        .iter()
        .zip(gt.data())
        .flat_map(|(&m, &g)| match (m == 255, g == 255) {
            (true, true) => [255, 255, 255, 255],
            (true, false) => [230, 60, 50, 255],
            (false, true) => [40, 110, 240, 255],
            (false, false) => [0, 0, 0, 255],
        })
        .collect()
}

impl Demo {
    pub fn build(width: usize, height: usize, frames: usize, objects: usize, noise: f64, seed: u64) -> Result<Demo> {
        let mut cfg = SyntheticConfig::with_random_objects(width, height, frames, objects, seed);
        cfg.noise_sigma = noise;
        Ok(Demo {
            video: synth_generate(&cfg)?,
            seed,
            generated: [None, None, None],
            fused: None,
        })
    }

    /// Runs one generator; `sensitivity` in (0, 1] scales its threshold
    /// (mixture match width, sample radius or median distance), lower
    /// values flag more foreground. Returns the F-measure after burn-in.
    pub fn generate(&mut self, name: &str, sensitivity: f64) -> Result<f64> {
        let k = stream_index(name).ok_or_else(|| fuselab::Error::UnknownAlgorithm(name.to_string()))?;
        let s = sensitivity.clamp(0.05, 1.0);
        let mut params = BgsParams { seed: self.seed, ..Default::default() };
        params.gmm.lambda = (4.0 * s) as f32;
        params.sc.radius = (40.0 * s).round().max(1.0) as u8;
        params.median.threshold = (60.0 * s) as f32;
        let algo: Algorithm = name.parse()?;
        let masks = run_bgs(&self.video.frames, algo, &params)?;
        let fm = self.score(&masks, algo.burn_in(&params));
        self.generated[k] = Some(masks);
        self.fused = None;
        Ok(fm)
    }

    /// Fuses the generated streams. An empty expression means majority
    /// vote over every stream generated so far.
    pub fn fuse(&mut self, expr: &str) -> Result<f64> {
        let available: Vec<(String, &Vec<Mask>)> = STREAMS
            .iter()
            .zip(&self.generated)
            .filter_map(|(n, g)| g.as_ref().map(|m| (n.to_string(), m)))
            .collect();
        if available.is_empty() {
            return Err(fuselab::Error::InvalidInput("run at least one generator first".into()));
        }
        let parsed = if expr.trim().is_empty() { None } else { Some(parse_expr(expr)?) };
        let mut fused = Vec::with_capacity(self.frames());
        for t in 0..self.frames() {
            let set = MaskSet::new(available.iter().map(|(n, m)| (n.clone(), m[t].clone())).collect())?;
            fused.push(match &parsed {
                Some(e) => eval_expr(e, &set)?,
                None => majority_vote(&set),
            });
        }
        let fm = self.score(&fused, self.burn_in());
        self.fused = Some(fused);
        Ok(fm)
    }

    fn burn_in(&self) -> usize {
        let p = BgsParams::default();
        Algorithm::ALL.iter().map(|a| a.burn_in(&p)).max().unwrap_or(0).min(self.frames() / 2)
    }

    fn score(&self, masks: &[Mask], burn_in: usize) -> f64 {
        let burn_in = burn_in.min(masks.len().saturating_sub(1));
        let c: ConfusionCounts = masks[burn_in..]
            .iter()
            .zip(&self.video.groundtruth[burn_in..])
            .map(|(m, g)| confusion(m, g).expect("generator masks match the scene"))
            .sum();
        metrics_from_counts(&c).map(|m| m.fm).unwrap_or(0.0)
    }

    pub fn stream(&self, name: &str) -> Option<&[Mask]> {
        match name {
            "gt" => Some(&self.video.groundtruth),
            "fused" => self.fused.as_deref(),
            _ => stream_index(name).and_then(|k| self.generated[k].as_deref()),
        }
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(width: usize, height: usize, frames: usize, objects: usize, noise: f64, seed: u32) -> std::result::Result<Demo, JsError> {
        Demo::build(width, height, frames, objects, noise, seed as u64).map_err(js)
    }

    pub fn width(&self) -> usize {
        self.video.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.video.frames[0].height()
    }

    pub fn frames(&self) -> usize {
        self.video.frames.len()
    }

    #[wasm_bindgen(js_name = runGenerator)]
    pub fn run_generator(&mut self, name: &str, sensitivity: f64) -> std::result::Result<f64, JsError> {
        self.generate(name, sensitivity).map_err(js)
    }

    #[wasm_bindgen(js_name = fuseStreams)]
    pub fn fuse_streams(&mut self, expr: &str) -> std::result::Result<f64, JsError> {
        self.fuse(expr).map_err(js)
    }

    /// RGBA pixels of input frame `t`.
    #[wasm_bindgen(js_name = frameRgba)]
    pub fn frame_rgba(&self, t: usize) -> Vec<u8> {
        self.video.frames.get(t).map(gray_rgba).unwrap_or_default()
    }

    /// RGBA pixels of mask `t` of a stream (`gt`, `gmm`, `sc`, `median` or
    /// `fused`); empty if that stream does not exist yet.
    #[wasm_bindgen(js_name = maskRgba)]
    pub fn mask_rgba(&self, name: &str, t: usize) -> Vec<u8> {
        let gt = &self.video.groundtruth;
        match (self.stream(name), gt.get(t)) {
            (Some(s), Some(g)) => s.get(t).map(|m| mask_rgba(m, g)).unwrap_or_default(),
            _ => Vec::new(),
        }
    }
}
