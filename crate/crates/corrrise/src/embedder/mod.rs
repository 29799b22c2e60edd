//! The black-box model abstraction: anything that turns an image into a
//! fixed-dimension embedding vector. Saliency generation and evaluation only
//! ever call [`Embedder::embed`]; they never see weights or gradients.

mod onnx;
mod toy;

pub use onnx::{OnnxEmbedder, Preprocessing};
pub use toy::{
    ConstantEmbedder, GatedToyEmbedder, RandomizedToyEmbedder, Rect, ToyRegionEmbedder,
};

use crate::error::{Error, Result};

/// Fixed-dimension float vector produced by a backend.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    data: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Contract("embedding must be non-empty".into()));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Backend(format!("embedding contains non-finite value {bad}")));
        }
        Ok(EmbeddingVector { data })
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// True when the vector has no direction to compare (all zeros). A black
    /// input through a mean-pooling backend produces exactly this.
    pub fn is_zero_norm(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn cosine(&self, other: &EmbeddingVector) -> Result<f64> {
        crate::stats::cosine_similarity(&self.data, &other.data)
    }
}

/// A face-embedding backend. Implementations must be deterministic: the same
/// image yields a bit-identical vector on every call, so results are
/// independent of scheduling and worker count.
pub trait Embedder: Send + Sync {
    /// Output dimension, constant across calls.
    fn embedding_dim(&self) -> usize;

    /// Required input size `(height, width)`, or `None` if any size is
    /// accepted.
    fn input_size(&self) -> Option<(usize, usize)>;

    /// Required channel count.
    fn channels(&self) -> usize;

    /// Identity string recorded in run metadata.
    fn id(&self) -> String;

    /// Whether repeated calls on the same input are bit-identical. All
    /// backends shipped here are.
    fn deterministic(&self) -> bool {
        true
    }

    fn embed(&self, img: &crate::types::ImageTensor) -> Result<EmbeddingVector>;

    /// Embed a homogeneous batch; element `i` equals `embed(imgs[i])`
    /// exactly, order preserved. A failing element aborts with its index.
    fn embed_batch(&self, imgs: &[crate::types::ImageTensor]) -> Result<Vec<EmbeddingVector>> {
        imgs.iter()
            .enumerate()
            .map(|(i, img)| {
                self.embed(img)
                    .map_err(|e| Error::Backend(format!("batch element {i}: {e}")))
            })
            .collect()
    }

    /// New backend of identical signature whose parameters are re-drawn from
    /// the given seed, for the explanation sanity check. Backends without
    /// mutable parameters return an unsupported-operation error.
    fn randomize_parameters(&self, seed: u64) -> Result<Box<dyn Embedder>>;
}

/// Check an image against a backend's declared input contract.
pub(crate) fn check_input(backend: &dyn Embedder, img: &crate::types::ImageTensor) -> Result<()> {
    if let Some((h, w)) = backend.input_size() {
        if img.height() != h || img.width() != w {
            return Err(Error::Contract(format!(
                "image {}x{} does not match backend input {h}x{w}",
                img.height(),
                img.width()
            )));
        }
    }
    if img.channels() != backend.channels() {
        return Err(Error::Contract(format!(
            "image has {} channels, backend expects {}",
            img.channels(),
            backend.channels()
        )));
    }
    Ok(())
}
