//! Seedable random mask generation.
//!
//! Each mask starts from an all-zero (invisible) field; square patches of a
//! fixed side are placed at uniform random positions, each filled with one
//! constant value drawn uniformly from `[0, 1]`, and overlapping patches
//! merge by per-pixel maximum. Everything is driven by a single
//! [`SplitMix64`] stream so a stack is reproducible byte-for-byte from
//! `(seed, config, dimensions)`.
//!
//! Sampling order is part of the format: for each mask, for each patch in
//! order, draw top row (`next_below`), then left column (`next_below`), then
//! the fill value (`next_f64`); masks are drawn in index order.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::types::Mask;
use serde::{Deserialize, Serialize};

/// Parameters of the mask generator.
///
/// The defaults (8 patches of side `min(h, w) / 4`) cover roughly half of
/// the image per mask in expectation, leaving every pixel visible in some
/// masks and hidden in others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskGenConfig {
    /// Number of masks in a stack.
    pub num_masks: usize,
    /// Square patches placed per mask.
    pub patches_per_mask: usize,
    /// Patch side length in pixels.
    pub patch_size: usize,
    /// Seed of the mask stream.
    pub seed: u64,
    /// Optional box-blur radius applied to each finished mask (0 = off,
    /// the default; patch edges stay hard).
    pub blur_radius: usize,
}

pub const DEFAULT_NUM_MASKS: usize = 500;
pub const DEFAULT_PATCHES_PER_MASK: usize = 8;

impl MaskGenConfig {
    /// Defaults for the given image size: 500 masks, 8 patches, patch side
    /// one quarter of the smaller dimension (28 for 112x112 inputs).
    pub fn default_for(height: usize, width: usize, seed: u64) -> MaskGenConfig {
        MaskGenConfig {
            num_masks: DEFAULT_NUM_MASKS,
            patches_per_mask: DEFAULT_PATCHES_PER_MASK,
            patch_size: (height.min(width) / 4).max(1),
            seed,
            blur_radius: 0,
        }
    }

    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        if height == 0 || width == 0 {
            return Err(Error::Config("mask dimensions must be nonzero".into()));
        }
        if self.num_masks < 2 {
            return Err(Error::Config(format!(
                "num_masks must be at least 2 (correlation needs variance), got {}",
                self.num_masks
            )));
        }
        if self.patches_per_mask == 0 {
            return Err(Error::Config("patches_per_mask must be positive".into()));
        }
        if self.patch_size == 0 {
            return Err(Error::Config("patch_size must be positive".into()));
        }
        if self.patch_size > height.min(width) {
            return Err(Error::Config(format!(
                "patch_size {} exceeds image dimensions {}x{}",
                self.patch_size, height, width
            )));
        }
        Ok(())
    }
}

/// Draw one mask from the stream. Patch top-left corners are uniform over
/// all positions that keep the patch fully inside the image.
pub fn generate_mask(
    cfg: &MaskGenConfig,
    rng: &mut SplitMix64,
    height: usize,
    width: usize,
) -> Result<Mask> {
    cfg.validate(height, width)?;
    let mut data = vec![0.0f32; height * width];
    let max_row = (height - cfg.patch_size + 1) as u64;
    let max_col = (width - cfg.patch_size + 1) as u64;
    for _ in 0..cfg.patches_per_mask {
        let top = rng.next_below(max_row) as usize;
        let left = rng.next_below(max_col) as usize;
        let value = rng.next_f64() as f32;
        for r in top..top + cfg.patch_size {
            let row = &mut data[r * width..(r + 1) * width];
            for v in &mut row[left..left + cfg.patch_size] {
                if value > *v {
                    *v = value;
                }
            }
        }
    }
    if cfg.blur_radius > 0 {
        data = box_blur(&data, height, width, cfg.blur_radius);
    }
    Mask::new(height, width, data)
}

/// Draw a full stack of `cfg.num_masks` masks from one stream seeded with
/// `cfg.seed`.
pub fn generate_stack(cfg: &MaskGenConfig, height: usize, width: usize) -> Result<Vec<Mask>> {
    cfg.validate(height, width)?;
    let mut rng = SplitMix64::new(cfg.seed);
    (0..cfg.num_masks).map(|_| generate_mask(cfg, &mut rng, height, width)).collect()
}

/// Separable box blur with edge-clamped windows (each output is the mean of
/// the in-bounds window), so values stay in `[0, 1]`.
fn box_blur(data: &[f32], height: usize, width: usize, radius: usize) -> Vec<f32> {
    let horizontal: Vec<f32> = (0..height * width)
        .map(|i| {
            let (r, c) = (i / width, i % width);
            let lo = c.saturating_sub(radius);
            let hi = (c + radius).min(width - 1);
            let sum: f64 = (lo..=hi).map(|cc| data[r * width + cc] as f64).sum();
            (sum / (hi - lo + 1) as f64) as f32
        })
        .collect();
    (0..height * width)
        .map(|i| {
            let (r, c) = (i / width, i % width);
            let lo = r.saturating_sub(radius);
            let hi = (r + radius).min(height - 1);
            let sum: f64 = (lo..=hi).map(|rr| horizontal[rr * width + c] as f64).sum();
            (sum / (hi - lo + 1) as f64) as f32
        })
        .collect()
}
