//! Everything between the filesystem and the algorithms: pair manifests,
//! image decoding, the saliency interchange format, heatmap rendering, and
//! run metadata.

mod heatmap;
mod imageio;
mod manifest;
pub mod runmeta;
mod salm;

pub use heatmap::{render_heatmap, HeatmapMode};
pub use imageio::{image_to_png, load_image, mask_to_png, CropMode};
pub use manifest::{load_manifest, Manifest, PairRecord};
pub use runmeta::RunMetadata;
pub use salm::{load_saliency, saliency_from_bytes, saliency_to_bytes, save_saliency};

use crate::error::{Error, Result};
use std::path::Path;

/// Write bytes atomically: to a temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    ));
    std::fs::write(&tmp, bytes).map_err(|e| Error::Data(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok(())
}
