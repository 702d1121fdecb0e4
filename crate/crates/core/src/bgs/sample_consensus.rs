//! Sample-consensus background model: each pixel keeps a bag of past
//! intensities and is background when enough of them are close to the new
//! value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_dims, BackgroundModel};
use crate::{Error, Frame, Mask, Plane, Result, BACKGROUND, FOREGROUND};

#[derive(Clone, Debug, PartialEq)]
pub struct SampleConsensusParams {
    /// Samples per pixel.
    pub samples: usize,
    /// Match radius in intensity levels (strict `<`).
    pub radius: u8,
    /// Matches required to call a pixel background.
    pub min_matches: usize,
    /// Updates happen with probability `1 / subsampling`.
    pub subsampling: u32,
}

impl Default for SampleConsensusParams {
    fn default() -> Self {
        Self {
            samples: 20,
            radius: 20,
            min_matches: 2,
            subsampling: 16,
        }
    }
}

const NEIGHBORS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Initialized from the first frame it sees; that frame is reported as
/// all background.
pub struct SampleModel {
    width: usize,
    height: usize,
    params: SampleConsensusParams,
    samples: Vec<u8>,
    initialized: bool,
    rng: ChaCha8Rng,
}

impl SampleModel {
    pub fn new(width: usize, height: usize, params: SampleConsensusParams, seed: u64) -> Result<Self> {
        if params.samples == 0 || params.min_matches == 0 || params.min_matches > params.samples {
            return Err(Error::Config(format!(
                "sample consensus needs 1 <= min_matches ({}) <= samples ({})",
                params.min_matches, params.samples
            )));
        }
        if params.subsampling == 0 {
            return Err(Error::Config("subsampling factor must be >= 1".into()));
        }
        Ok(Self {
            width,
            height,
            samples: Vec::new(),
            params,
            initialized: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    /// The stored samples of one pixel.
    pub fn pixel_samples(&self, x: usize, y: usize) -> &[u8] {
        let s = self.params.samples;
        let i = y * self.width + x;
        &self.samples[i * s..(i + 1) * s]
    }

    fn random_neighbor(&mut self, x: usize, y: usize) -> usize {
        let (dx, dy) = NEIGHBORS[self.rng.random_range(0..NEIGHBORS.len())];
        let nx = (x as isize + dx).clamp(0, self.width as isize - 1) as usize;
        let ny = (y as isize + dy).clamp(0, self.height as isize - 1) as usize;
        ny * self.width + nx
    }

    /// Fills every pixel's samples from its 8-neighbourhood in `frame`.
    pub fn initialize(&mut self, frame: &Frame) -> Result<()> {
        check_dims(frame, self.width, self.height)?;
        let s = self.params.samples;
        self.samples = vec![0; self.width * self.height * s];
        for y in 0..self.height {
            for x in 0..self.width {
                let i = y * self.width + x;
                for k in 0..s {
                    let n = self.random_neighbor(x, y);
                    self.samples[i * s + k] = frame.data()[n];
                }
            }
        }
        self.initialized = true;
        Ok(())
    }

    /// Classification only, no model update.
    pub fn classify(&self, frame: &Frame) -> Result<Mask> {
        if !self.initialized {
            return Err(Error::InvalidInput("sample-consensus model is not initialized".into()));
        }
        check_dims(frame, self.width, self.height)?;
        let data = frame
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| if self.matches(i, v) { BACKGROUND } else { FOREGROUND })
            .collect();
        Plane::new(self.width, self.height, data)
    }

    fn matches(&self, i: usize, v: u8) -> bool {
        let s = self.params.samples;
        let r = self.params.radius as i16;
        let mut count = 0;
        for &sample in &self.samples[i * s..(i + 1) * s] {
            if (v as i16 - sample as i16).abs() < r {
                count += 1;
                if count >= self.params.min_matches {
                    return true;
                }
            }
        }
        false
    }
}

impl BackgroundModel for SampleModel {
    fn step(&mut self, frame: &Frame) -> Result<Mask> {
        if !self.initialized {
            self.initialize(frame)?;
            return Ok(Plane::filled(self.width, self.height, BACKGROUND));
        }
        let mask = self.classify(frame)?;
        let s = self.params.samples;
        let phi = self.params.subsampling;
        for y in 0..self.height {
            for x in 0..self.width {
                let i = y * self.width + x;
                if mask.data()[i] != BACKGROUND {
                    continue;
                }
                let v = frame.data()[i];
                if self.rng.random_range(0..phi) == 0 {
                    let k = self.rng.random_range(0..s);
                    self.samples[i * s + k] = v;
                }
                if self.rng.random_range(0..phi) == 0 {
                    let n = self.random_neighbor(x, y);
                    let k = self.rng.random_range(0..s);
                    self.samples[n * s + k] = v;
                }
            }
        }
        Ok(mask)
    }
}
