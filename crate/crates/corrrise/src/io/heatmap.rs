//! Saliency heatmap rendering: the map is normalized by its maximum absolute
//! value (visualization only; raw data is untouched) and blended over the
//! image, warm for positive values, cool for negative, magnitude as opacity.

use crate::error::{Error, Result};
use crate::types::{ImageTensor, SaliencyMap};
use image::{ImageBuffer, Rgb};
use std::path::Path;

/// Which side of the signed map to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapMode {
    Signed,
    Positive,
    Negative,
}

const WARM: [f32; 3] = [1.0, 0.27, 0.0];
const COOL: [f32; 3] = [0.0, 0.45, 1.0];

/// Render `map` over `img` as a PNG. Deterministic: same inputs give a
/// byte-identical file.
pub fn render_heatmap(
    img: &ImageTensor,
    map: &SaliencyMap,
    mode: HeatmapMode,
    path: &Path,
) -> Result<()> {
    if img.height() != map.height() || img.width() != map.width() {
        return Err(Error::Contract(format!(
            "heatmap: image {}x{} vs map {}x{}",
            img.height(),
            img.width(),
            map.height(),
            map.width()
        )));
    }
    let max_abs = map.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_fn(img.width() as u32, img.height() as u32, |x, y| {
            let (r, c) = (y as usize, x as usize);
            let base = if img.channels() == 1 {
                let v = img.get(r, c, 0);
                [v, v, v]
            } else {
                [img.get(r, c, 0), img.get(r, c, 1), img.get(r, c, 2)]
            };
            let v = map.get(r, c);
            let shown = match mode {
                HeatmapMode::Signed => v,
                HeatmapMode::Positive => v.max(0.0),
                HeatmapMode::Negative => v.min(0.0),
            };
            if shown == 0.0 || max_abs == 0.0 {
                return Rgb(base.map(|b| (b * 255.0).round() as u8));
            }
            let alpha = (shown.abs() / max_abs) as f32;
            let color = if shown > 0.0 { WARM } else { COOL };
            Rgb([0, 1, 2].map(|i| {
                (((1.0 - alpha) * base[i] + alpha * color[i]) * 255.0).round().clamp(0.0, 255.0)
                    as u8
            }))
        });
    buf.save(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}
