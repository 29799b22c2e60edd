//! Model argument parsing: an ONNX file path, or an inline toy-backend spec.
//!
//! Toy grammar (comma-separated fields after `toy:`):
//! - `toy:grid=4,size=112x112,channels=1` — grid-average pooler
//! - `toy:grid=4,region=0:0:56:112` — pooling restricted to a pixel rectangle
//! - `toy:gated,grid=4,gate=0.25` — pooler with a rectifying gate
//! - `toy:constant,dim=8` — returns a constant all-ones vector

use crate::embedder::{
    ConstantEmbedder, Embedder, GatedToyEmbedder, OnnxEmbedder, Preprocessing, Rect,
    ToyRegionEmbedder,
};
use crate::error::{Error, Result};
use std::path::Path;

pub fn build_backend(spec: &str, preprocessing: Option<Preprocessing>) -> Result<Box<dyn Embedder>> {
    match spec.strip_prefix("toy:") {
        Some(rest) => build_toy(rest),
        None => Ok(Box::new(OnnxEmbedder::load(Path::new(spec), preprocessing)?)),
    }
}

fn build_toy(spec: &str) -> Result<Box<dyn Embedder>> {
    let bad = |msg: String| Error::Config(format!("toy model spec: {msg}"));

    let mut kind = "region";
    let mut size = (112usize, 112usize);
    let mut channels = 1usize;
    let mut grid = 4usize;
    let mut region: Option<Rect> = None;
    let mut gate = 0.25f64;
    let mut dim = 4usize;

    for field in spec.split(',').filter(|f| !f.is_empty()) {
        match field.split_once('=') {
            None => match field {
                "region" | "constant" | "gated" => kind = field,
                other => return Err(bad(format!("unknown kind `{other}`"))),
            },
            Some((key, value)) => match key {
                "size" => {
                    let (h, w) = value
                        .split_once('x')
                        .ok_or_else(|| bad(format!("size must be HxW, got `{value}`")))?;
                    size = (
                        h.parse().map_err(|_| bad(format!("bad height `{h}`")))?,
                        w.parse().map_err(|_| bad(format!("bad width `{w}`")))?,
                    );
                }
                "channels" => {
                    channels = value.parse().map_err(|_| bad(format!("bad channels `{value}`")))?
                }
                "grid" => grid = value.parse().map_err(|_| bad(format!("bad grid `{value}`")))?,
                "gate" => gate = value.parse().map_err(|_| bad(format!("bad gate `{value}`")))?,
                "dim" => dim = value.parse().map_err(|_| bad(format!("bad dim `{value}`")))?,
                "region" => {
                    let parts: Vec<usize> = value
                        .split(':')
                        .map(|p| p.parse().map_err(|_| bad(format!("bad region part `{p}`"))))
                        .collect::<Result<_>>()?;
                    if parts.len() != 4 {
                        return Err(bad(format!("region must be x0:y0:x1:y1, got `{value}`")));
                    }
                    region = Some(Rect::new(parts[0], parts[1], parts[2], parts[3])?);
                }
                other => return Err(bad(format!("unknown key `{other}`"))),
            },
        }
    }

    let (height, width) = size;
    match kind {
        "region" => Ok(Box::new(ToyRegionEmbedder::new(height, width, channels, grid, region)?)),
        "gated" => {
            let pool = ToyRegionEmbedder::new(height, width, channels, grid, region)?;
            Ok(Box::new(GatedToyEmbedder::new(pool, gate)?))
        }
        "constant" => {
            Ok(Box::new(ConstantEmbedder::new(height, width, channels, vec![1.0; dim])?))
        }
        other => Err(bad(format!("unknown kind `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_toy_spec() {
        let b = build_backend("toy:", None).unwrap();
        assert_eq!(b.input_size(), Some((112, 112)));
        assert_eq!(b.embedding_dim(), 16);
        assert_eq!(b.channels(), 1);
    }

    #[test]
    fn full_region_spec() {
        let b = build_backend("toy:grid=2,size=8x8,channels=3,region=0:0:4:8", None).unwrap();
        assert_eq!(b.embedding_dim(), 2 * 2 * 3);
        assert_eq!(b.input_size(), Some((8, 8)));
    }

    #[test]
    fn gated_and_constant_specs() {
        let g = build_backend("toy:gated,grid=4,gate=0.3", None).unwrap();
        assert!(g.id().contains("gate=0.3"), "{}", g.id());
        let c = build_backend("toy:constant,dim=6,size=8x8", None).unwrap();
        assert_eq!(c.embedding_dim(), 6);
    }

    #[test]
    fn bad_specs_are_usage_errors() {
        for spec in [
            "toy:grid=x",
            "toy:region=1:2:3",
            "toy:size=112",
            "toy:wheel=4",
            "toy:banana",
        ] {
            let err = build_backend(spec, None).map(|_| ()).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{spec}: {err}");
        }
    }

    #[test]
    fn missing_onnx_file_is_data_error() {
        let err = build_backend("/nonexistent/model.onnx", None).map(|_| ()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
