//! Image decode and resize. Grayscale sources become single-channel tensors,
//! color sources three-channel; alpha is dropped. Resampling is bilinear on
//! the decoded 8-bit image, after an optional center square crop.

use crate::error::{Error, Result};
use crate::types::{ImageTensor, Mask};
use image::imageops::FilterType;
use image::{GenericImageView, ImageBuffer, Luma};
use std::path::Path;

/// Whether to center-crop to a square before resizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CropMode {
    None,
    CenterSquare,
}

/// Decode (PNG or JPEG), optionally center-crop to a square, resize to
/// `target` if given, convert to floats in `[0, 1]`, and adapt to
/// `channels` (1 or 3) if given.
pub fn load_image(
    path: &Path,
    target: Option<(usize, usize)>,
    crop: CropMode,
    channels: Option<usize>,
) -> Result<ImageTensor> {
    let named = |e: String| Error::Data(format!("{}: {e}", path.display()));
    let mut img = image::open(path).map_err(|e| named(e.to_string()))?;

    if crop == CropMode::CenterSquare {
        let (w, h) = img.dimensions();
        if w != h {
            let side = w.min(h);
            img = img.crop_imm((w - side) / 2, (h - side) / 2, side, side);
        }
    }
    if let Some((th, tw)) = target {
        if (img.height() as usize, img.width() as usize) != (th, tw) {
            img = img.resize_exact(tw as u32, th as u32, FilterType::Triangle);
        }
    }

    let wants_gray = match channels {
        Some(1) => true,
        Some(3) => false,
        Some(other) => return Err(Error::Config(format!("channels must be 1 or 3, got {other}"))),
        None => img.color().channel_count() < 3,
    };
    let (h, w) = (img.height() as usize, img.width() as usize);
    if wants_gray {
        let gray = img.to_luma8();
        let data = gray.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
        ImageTensor::new(h, w, 1, data)
    } else {
        let rgb = img.to_rgb8();
        let data = rgb.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
        ImageTensor::new(h, w, 3, data)
    }
}

/// Save a mask as an 8-bit grayscale PNG (value 1.0 maps to 255).
pub fn mask_to_png(mask: &Mask, path: &Path) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_fn(
        mask.width() as u32,
        mask.height() as u32,
        |x, y| Luma([(mask.get(y as usize, x as usize) * 255.0).round() as u8]),
    );
    buf.save(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Encode an image tensor to a PNG at `path` (grayscale or RGB by channel
/// count).
pub fn image_to_png(img: &ImageTensor, path: &Path) -> Result<()> {
    let to_u8 = |v: f32| (v * 255.0).round().clamp(0.0, 255.0) as u8;
    let save_err = |e: image::ImageError| Error::Data(format!("{}: {e}", path.display()));
    if img.channels() == 1 {
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
            ImageBuffer::from_fn(img.width() as u32, img.height() as u32, |x, y| {
                Luma([to_u8(img.get(y as usize, x as usize, 0))])
            });
        buf.save(path).map_err(save_err)
    } else {
        let buf: ImageBuffer<image::Rgb<u8>, Vec<u8>> =
            ImageBuffer::from_fn(img.width() as u32, img.height() as u32, |x, y| {
                image::Rgb([
                    to_u8(img.get(y as usize, x as usize, 0)),
                    to_u8(img.get(y as usize, x as usize, 1)),
                    to_u8(img.get(y as usize, x as usize, 2)),
                ])
            });
        buf.save(path).map_err(save_err)
    }
}
