//! Running-median background model.

use super::{check_dims, BackgroundModel};
use crate::{Error, Frame, Mask, Plane, Result, BACKGROUND, FOREGROUND};

#[derive(Clone, Debug, PartialEq)]
pub struct MedianParams {
    /// Frames kept per pixel.
    pub buffer: usize,
    /// Foreground when `|v - median| > threshold`.
    pub threshold: f32,
}

impl Default for MedianParams {
    fn default() -> Self {
        Self {
            buffer: 51,
            threshold: 30.0,
        }
    }
}

/// Per-pixel ring buffer of recent intensities. A pixel with an empty buffer
/// is background.
pub struct MedianModel {
    width: usize,
    height: usize,
    params: MedianParams,
    history: Vec<u8>,
    len: usize,
    head: usize,
    scratch: Vec<u8>,
}

impl MedianModel {
    pub fn new(width: usize, height: usize, params: MedianParams) -> Result<Self> {
        if params.buffer == 0 {
            return Err(Error::Config("median buffer must hold at least one frame".into()));
        }
        Ok(Self {
            width,
            height,
            history: vec![0; width * height * params.buffer],
            scratch: Vec::with_capacity(params.buffer),
            params,
            len: 0,
            head: 0,
        })
    }

    /// Entries currently buffered (the same for every pixel).
    pub fn buffered(&self) -> usize {
        self.len
    }

    fn median_at(&mut self, i: usize) -> f32 {
        let b = self.params.buffer;
        self.scratch.clear();
        self.scratch.extend_from_slice(&self.history[i * b..i * b + self.len]);
        let n = self.scratch.len();
        self.scratch.sort_unstable();
        if n % 2 == 1 {
            self.scratch[n / 2] as f32
        } else {
            (self.scratch[n / 2 - 1] as f32 + self.scratch[n / 2] as f32) / 2.0
        }
    }
}

impl BackgroundModel for MedianModel {
    fn step(&mut self, frame: &Frame) -> Result<Mask> {
        check_dims(frame, self.width, self.height)?;
        let b = self.params.buffer;
        let mut out = Vec::with_capacity(frame.len());
        for (i, &v) in frame.data().iter().enumerate() {
            let fg = self.len > 0 && (v as f32 - self.median_at(i)).abs() > self.params.threshold;
            out.push(if fg { FOREGROUND } else { BACKGROUND });
            // slots fill in order before the ring wraps, so the first `len`
            // entries are always the live ones
            self.history[i * b + self.head] = v;
        }
        self.head = (self.head + 1) % b;
        self.len = (self.len + 1).min(b);
        Plane::new(self.width, self.height, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_video_is_background() {
        let mut m = MedianModel::new(4, 4, MedianParams::default()).unwrap();
        for _ in 0..5 {
            assert_eq!(m.step(&Plane::filled(4, 4, 90)).unwrap().foreground_count(), 0);
        }
    }

    #[test]
    fn single_spike_is_foreground_once() {
        let mut m = MedianModel::new(3, 3, MedianParams::default()).unwrap();
        for _ in 0..10 {
            m.step(&Plane::filled(3, 3, 100)).unwrap();
        }
        let mut spike = Plane::filled(3, 3, 100);
        spike.set(1, 1, 160);
        let a = m.step(&spike).unwrap();
        assert_eq!(a.get(1, 1), FOREGROUND);
        assert_eq!(a.foreground_count(), 1);
        let b = m.step(&Plane::filled(3, 3, 100)).unwrap();
        assert_eq!(b.foreground_count(), 0);
    }

    #[test]
    fn buffer_is_bounded() {
        let p = MedianParams { buffer: 5, threshold: 30.0 };
        let mut m = MedianModel::new(2, 2, p).unwrap();
        for t in 0..12u8 {
            m.step(&Plane::filled(2, 2, t * 20)).unwrap();
            assert!(m.buffered() <= 5);
        }
        assert_eq!(m.buffered(), 5);
    }

    #[test]
    fn even_buffer_uses_midpoint() {
        let p = MedianParams { buffer: 4, threshold: 10.0 };
        let mut m = MedianModel::new(1, 1, p).unwrap();
        m.step(&Plane::filled(1, 1, 0)).unwrap();
        m.step(&Plane::filled(1, 1, 40)).unwrap();
        // median of {0, 40} is 20 and |29 - 20| <= 10
        assert_eq!(m.step(&Plane::filled(1, 1, 29)).unwrap().foreground_count(), 0);
    }
}
