//! Candidate-mask generators: per-pixel background models that turn a
//! grayscale video into binary foreground masks.

mod gmm;
mod median;
mod sample_consensus;

use std::str::FromStr;

pub use gmm::{GmmModel, GmmParams};
pub use median::{MedianModel, MedianParams};
pub use sample_consensus::{SampleConsensusParams, SampleModel};

use crate::{Error, Frame, Mask, Result};

/// A stateful background model fed one frame at a time.
pub trait BackgroundModel {
    /// Classifies `frame` against the current model, then updates the model.
    fn step(&mut self, frame: &Frame) -> Result<Mask>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Gmm,
    SampleConsensus,
    Median,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Gmm, Algorithm::SampleConsensus, Algorithm::Median];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Gmm => "gmm",
            Algorithm::SampleConsensus => "sc",
            Algorithm::Median => "median",
        }
    }

    /// Frames after which a static scene is reported as all background:
    /// one time constant `1 / alpha` for the mixture, the initializing frame
    /// for sample consensus, two frames for the median.
    pub fn burn_in(&self, params: &BgsParams) -> usize {
        match self {
            Algorithm::Gmm => (1.0 / params.gmm.alpha.max(f32::MIN_POSITIVE) as f64).round() as usize,
            Algorithm::SampleConsensus => 1,
            Algorithm::Median => 2,
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmm" => Ok(Algorithm::Gmm),
            "sc" => Ok(Algorithm::SampleConsensus),
            "median" => Ok(Algorithm::Median),
            other => Err(Error::UnknownAlgorithm(other.to_string())),
        }
    }
}

/// Parameters for every generator; only the one matching the chosen
/// algorithm is used.
#[derive(Clone, Debug, Default)]
pub struct BgsParams {
    pub gmm: GmmParams,
    pub sc: SampleConsensusParams,
    pub median: MedianParams,
    pub seed: u64,
}

/// Runs one generator over a whole video, producing one mask per frame.
pub fn run_bgs(frames: &[Frame], algo: Algorithm, params: &BgsParams) -> Result<Vec<Mask>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot run background subtraction on an empty video".into()))?;
    let (w, h) = first.dims();
    let mut model: Box<dyn BackgroundModel> = match algo {
        Algorithm::Gmm => Box::new(GmmModel::new(w, h, params.gmm.clone())?),
        Algorithm::SampleConsensus => Box::new(SampleModel::new(w, h, params.sc.clone(), params.seed)?),
        Algorithm::Median => Box::new(MedianModel::new(w, h, params.median.clone())?),
    };
    frames.iter().map(|f| model.step(f)).collect()
}

pub(crate) fn check_dims(frame: &Frame, w: usize, h: usize) -> Result<()> {
    if frame.dims() != (w, h) {
        return Err(Error::Shape(format!(
            "frame is {}x{}, model is {w}x{h}",
            frame.width(),
            frame.height()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Plane;

    #[test]
    fn one_binary_mask_per_frame() {
        let frames: Vec<Frame> = (0..100)
            .map(|t| Plane::from_fn(16, 12, |x, y| ((x * 7 + y * 3 + t) % 256) as u8))
            .collect();
        for algo in Algorithm::ALL {
            let masks = run_bgs(&frames, algo, &BgsParams::default()).unwrap();
            assert_eq!(masks.len(), 100);
            assert!(masks.iter().all(|m| m.dims() == (16, 12) && m.is_binary()));
        }
    }

    #[test]
    fn unknown_algorithm_and_empty_video() {
        assert!(matches!("xyz".parse::<Algorithm>(), Err(Error::UnknownAlgorithm(_))));
        assert!(run_bgs(&[], Algorithm::Gmm, &BgsParams::default()).is_err());
    }
}
