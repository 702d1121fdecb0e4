use crate::{Error, Result};

pub const BACKGROUND: u8 = 0;
pub const FOREGROUND: u8 = 255;

/// A single-channel 8-bit image stored row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

/// Grayscale video frame.
pub type Frame = Plane;

/// Foreground mask (`0` background, `255` foreground) or a CDnet ground-truth
/// image carrying the five-value encoding.
pub type Mask = Plane;

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "image dimensions must be nonzero, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} image needs {} bytes, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be nonzero");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut plane = Self::filled(width, height, 0);
        for y in 0..height {
            for x in 0..width {
                plane.data[y * width + x] = f(x, y);
            }
        }
        plane
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == BACKGROUND || v == FOREGROUND)
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == FOREGROUND).count()
    }

    pub(crate) fn ensure_same_dims(&self, other: &Plane, what: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    pub(crate) fn ensure_binary(&self, what: &str) -> Result<()> {
        if let Some(v) = self.data.iter().find(|&&v| v != BACKGROUND && v != FOREGROUND) {
            return Err(Error::InvalidInput(format!(
                "{what} must be binary {{0,255}}, found value {v}"
            )));
        }
        Ok(())
    }
}
