//! Domain types shared by every module: images, masks, and saliency maps.
//!
//! Images and masks store `f32` in `[0, 1]`; saliency maps store `f64`
//! Pearson coefficients in `[-1, 1]`. All buffers are row-major, images
//! channel-interleaved.

use crate::error::{Error, Result};

/// Decoded image: `height x width x channels` floats in `[0, 1]`,
/// row-major, channel-interleaved. Channels is 1 or 3.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Contract("image dimensions must be nonzero".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Contract(format!("channels must be 1 or 3, got {channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::Contract(format!(
                "image data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::Contract(format!("image value {bad} outside [0, 1]")));
        }
        Ok(ImageTensor { height, width, channels, data })
    }

    /// Constant-valued image.
    pub fn constant(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        ImageTensor::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    /// Element-wise product with a visibility mask, the mask value broadcast
    /// across channels. Output stays in `[0, 1]`.
    pub fn apply_mask(&self, mask: &Mask) -> Result<ImageTensor> {
        if mask.height() != self.height || mask.width() != self.width {
            return Err(Error::Contract(format!(
                "mask {}x{} does not match image {}x{}",
                mask.height(),
                mask.width(),
                self.height,
                self.width
            )));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for (px, &m) in mask.data().iter().enumerate() {
            let base = px * self.channels;
            for c in 0..self.channels {
                data.push(self.data[base + c] * m);
            }
        }
        Ok(ImageTensor { height: self.height, width: self.width, channels: self.channels, data })
    }

    /// Copy with every pixel listed in `pixels` (flat row-major indices) set
    /// to `fill` on all channels.
    pub fn with_pixels_filled(&self, pixels: &[usize], fill: f32) -> ImageTensor {
        let mut out = self.clone();
        for &px in pixels {
            let base = px * self.channels;
            for c in 0..self.channels {
                out.data[base + c] = fill;
            }
        }
        out
    }

    /// Constant image of `base` with every pixel listed in `pixels` restored
    /// from `self`.
    pub fn revealed_on(&self, pixels: &[usize], base: f32) -> ImageTensor {
        let mut out = ImageTensor {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: vec![base; self.data.len()],
        };
        for &px in pixels {
            let b = px * self.channels;
            for c in 0..self.channels {
                out.data[b + c] = self.data[b + c];
            }
        }
        out
    }
}

/// Multiplicative visibility field: `height x width` floats in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Contract(format!(
                "mask data length {} does not match {height}x{width}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::Contract(format!("mask value {bad} outside [0, 1]")));
        }
        Ok(Mask { height, width, data })
    }

    pub fn constant(height: usize, width: usize, value: f32) -> Result<Self> {
        Mask::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }
}

/// Signed per-pixel attribution: `height x width` Pearson coefficients in
/// `[-1, 1]`. Positive values mark similarity evidence, negative values
/// dissimilarity evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Contract(format!(
                "saliency data length {} does not match {height}x{width}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::Contract(format!("saliency value {bad} outside [-1, 1]")));
        }
        Ok(SaliencyMap { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> SaliencyMap {
        SaliencyMap { height, width, data: vec![0.0; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Split into the positive part (values >= 0, others zeroed) and the
    /// negative part (values < 0, others zeroed). The two parts always sum
    /// back to the original map exactly.
    pub fn split_signed(&self) -> (SaliencyMap, SaliencyMap) {
        let positive: Vec<f64> =
            self.data.iter().map(|&v| if v >= 0.0 { v } else { 0.0 }).collect();
        let negative: Vec<f64> =
            self.data.iter().map(|&v| if v < 0.0 { v } else { 0.0 }).collect();
        (
            SaliencyMap { height: self.height, width: self.width, data: positive },
            SaliencyMap { height: self.height, width: self.width, data: negative },
        )
    }

    /// Element-wise negation (sign-symmetry audits flip score series and
    /// expect exactly this map).
    pub fn negated(&self) -> SaliencyMap {
        SaliencyMap {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| -v).collect(),
        }
    }
}
