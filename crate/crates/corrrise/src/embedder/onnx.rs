//! File-loaded neural backend: a single-input, single-output ONNX model
//! consumed as an opaque file. Input is `1xCxHxW` float32, output `1xD`
//! float32.

use super::{check_input, Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::rng::{fnv1a64, SplitMix64};
use crate::types::ImageTensor;
use std::path::Path;
use tract_onnx::pb;
use tract_onnx::prelude::*;
use tract_onnx::tract_hir::internal::DimLike;

/// Per-channel normalization applied before inference: `(v - mean) / std`
/// on pixel values already scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Preprocessing {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Preprocessing {
    /// Identity preprocessing: the `[0, 1]` pixel values go in unchanged.
    pub fn identity(channels: usize) -> Preprocessing {
        Preprocessing { mean: vec![0.0; channels], std: vec![1.0; channels] }
    }

    fn validate(&self, channels: usize) -> Result<()> {
        if self.mean.len() != channels || self.std.len() != channels {
            return Err(Error::Config(format!(
                "preprocessing mean/std must have {channels} entries"
            )));
        }
        if self.std.iter().any(|&s| s == 0.0 || !s.is_finite()) {
            return Err(Error::Config("preprocessing std must be finite and nonzero".into()));
        }
        Ok(())
    }
}

/// ONNX inference backend. Thread-safe: the compiled plan is immutable and
/// each call runs with its own state, so concurrent `embed` calls are
/// independent.
pub struct OnnxEmbedder {
    plan: Arc<TypedRunnableModel>,
    height: usize,
    width: usize,
    channels: usize,
    dim: usize,
    preprocessing: Preprocessing,
    /// FNV-1a digest of the serialized model this backend was built from.
    model_hash: u64,
    source: std::path::PathBuf,
    label: String,
}

impl OnnxEmbedder {
    /// Load a model file and compile it for inference.
    pub fn load(path: &Path, preprocessing: Option<Preprocessing>) -> Result<OnnxEmbedder> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let proto = tract_onnx::onnx()
            .proto_model_for_read(&mut std::io::Cursor::new(&bytes))
            .map_err(|e| Error::Data(format!("{}: not a readable ONNX model: {e}", path.display())))?;
        Self::from_proto(
            &proto,
            preprocessing,
            fnv1a64(&bytes),
            path.to_path_buf(),
            path.display().to_string(),
        )
    }

    fn from_proto(
        proto: &pb::ModelProto,
        preprocessing: Option<Preprocessing>,
        model_hash: u64,
        source: std::path::PathBuf,
        label: String,
    ) -> Result<OnnxEmbedder> {
        let backend_err = |e: TractError| Error::Backend(format!("{label}: {e:?}"));
        let model = tract_onnx::onnx()
            .model_for_proto_model(proto)
            .map_err(backend_err)?
            .into_optimized()
            .map_err(backend_err)?;

        if model.inputs.len() != 1 || model.outputs.len() != 1 {
            return Err(Error::Backend(format!(
                "{label}: expected a single-input single-output model, got {} inputs and {} outputs",
                model.inputs.len(),
                model.outputs.len()
            )));
        }
        let in_shape = concrete_shape(&model.input_fact(0).map_err(backend_err)?.shape)
            .ok_or_else(|| Error::Backend(format!("{label}: model input shape is not concrete")))?;
        let out_shape = concrete_shape(&model.output_fact(0).map_err(backend_err)?.shape)
            .ok_or_else(|| Error::Backend(format!("{label}: model output shape is not concrete")))?;
        if in_shape.len() != 4 || in_shape[0] != 1 {
            return Err(Error::Backend(format!(
                "{label}: model input must be 1xCxHxW, got {in_shape:?}"
            )));
        }
        let (channels, height, width) = (in_shape[1], in_shape[2], in_shape[3]);
        if channels != 1 && channels != 3 {
            return Err(Error::Backend(format!("{label}: model wants {channels} channels")));
        }
        let dim: usize = out_shape.iter().product();
        if dim == 0 {
            return Err(Error::Backend(format!("{label}: model output is empty")));
        }

        let preprocessing = preprocessing.unwrap_or_else(|| Preprocessing::identity(channels));
        preprocessing.validate(channels)?;
        let plan = model.into_runnable().map_err(backend_err)?;
        Ok(OnnxEmbedder {
            plan,
            height,
            width,
            channels,
            dim,
            preprocessing,
            model_hash,
            source,
            label,
        })
    }

    pub fn model_hash(&self) -> u64 {
        self.model_hash
    }
}

fn concrete_shape(shape: &ShapeFact) -> Option<Vec<usize>> {
    shape.iter().map(|d| d.to_usize().ok()).collect()
}

impl Embedder for OnnxEmbedder {
    fn embedding_dim(&self) -> usize {
        self.dim
    }

    fn input_size(&self) -> Option<(usize, usize)> {
        Some((self.height, self.width))
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn id(&self) -> String {
        format!("onnx:{}:fnv={:016x}", self.label, self.model_hash)
    }

    fn embed(&self, img: &ImageTensor) -> Result<EmbeddingVector> {
        check_input(self, img)?;
        let (h, w, c) = (self.height, self.width, self.channels);
        let mut data = vec![0.0f32; c * h * w];
        for ch in 0..c {
            let mean = self.preprocessing.mean[ch] as f32;
            let std = self.preprocessing.std[ch] as f32;
            let plane = &mut data[ch * h * w..(ch + 1) * h * w];
            for r in 0..h {
                for col in 0..w {
                    plane[r * w + col] = (img.get(r, col, ch) - mean) / std;
                }
            }
        }
        let tensor = tract_ndarray::Array4::from_shape_vec((1, c, h, w), data)
            .map_err(|e| Error::Backend(format!("tensor shape: {e}")))?;
        let outputs = self
            .plan
            .run(tvec!(Tensor::from(tensor).into_tvalue()))
            .map_err(|e| Error::Backend(format!("{}: inference failed: {e:?}", self.label)))?;
        let view = outputs[0].view();
        let values = view
            .as_slice::<f32>()
            .map_err(|e| Error::Backend(format!("{}: bad output tensor: {e:?}", self.label)))?;
        EmbeddingVector::new(values.iter().map(|&v| v as f64).collect())
    }

    /// Re-draw every float initializer tensor i.i.d. from its own empirical
    /// mean and standard deviation, preserving per-tensor scale so the fake
    /// model still produces finite embeddings. The redraw covers all
    /// initializers (weights and biases alike); seeded, so the same seed
    /// yields a bit-identical randomized model.
    fn randomize_parameters(&self, seed: u64) -> Result<Box<dyn Embedder>> {
        Ok(Box::new(Self::load_randomized(
            &self.source,
            Some(self.preprocessing.clone()),
            seed,
        )?))
    }
}

impl OnnxEmbedder {
    /// Load a model file with every float initializer re-drawn from the
    /// given seed (see [`Embedder::randomize_parameters`]).
    pub fn load_randomized(
        path: &Path,
        preprocessing: Option<Preprocessing>,
        seed: u64,
    ) -> Result<OnnxEmbedder> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let mut proto = tract_onnx::onnx()
            .proto_model_for_read(&mut std::io::Cursor::new(&bytes))
            .map_err(|e| Error::Data(format!("{}: not a readable ONNX model: {e}", path.display())))?;
        let graph = proto
            .graph
            .as_mut()
            .ok_or_else(|| Error::Data(format!("{}: model has no graph", path.display())))?;
        let mut rng = SplitMix64::new(seed);
        let mut randomized = 0usize;
        for init in &mut graph.initializer {
            if randomize_tensor(init, &mut rng) {
                randomized += 1;
            }
        }
        if randomized == 0 {
            return Err(Error::Backend(format!(
                "{}: no float initializers found to randomize",
                path.display()
            )));
        }
        let label = format!("{}#randomized(seed={seed})", path.display());
        Self::from_proto(&proto, preprocessing, fnv1a64(&bytes), path.to_path_buf(), label)
    }
}

/// Redraw one tensor in place if it is float-typed; returns whether it was.
fn randomize_tensor(init: &mut pb::TensorProto, rng: &mut SplitMix64) -> bool {
    use pb::tensor_proto::DataType;
    if init.data_type == DataType::Float as i32 {
        if !init.float_data.is_empty() {
            let redrawn = redraw(&init.float_data.iter().map(|&v| v as f64).collect::<Vec<_>>(), rng);
            init.float_data = redrawn.iter().map(|&v| v as f32).collect();
            return true;
        }
        if !init.raw_data.is_empty() && init.raw_data.len().is_multiple_of(4) {
            let values: Vec<f64> = init
                .raw_data
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect();
            let redrawn = redraw(&values, rng);
            init.raw_data =
                redrawn.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
            return true;
        }
    }
    if init.data_type == DataType::Double as i32 && !init.double_data.is_empty() {
        let redrawn = redraw(&init.double_data.clone(), rng);
        init.double_data = redrawn;
        return true;
    }
    false
}

/// I.i.d. normal redraw matching the empirical mean/std of `values`.
fn redraw(values: &[f64], rng: &mut SplitMix64) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    values.iter().map(|_| mean + std * rng.next_gaussian()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preprocessing_validation() {
        assert!(Preprocessing::identity(3).validate(3).is_ok());
        assert!(Preprocessing { mean: vec![0.0], std: vec![1.0] }.validate(3).is_err());
        assert!(Preprocessing { mean: vec![0.0; 3], std: vec![1.0, 0.0, 1.0] }
            .validate(3)
            .is_err());
    }

    #[test]
    fn redraw_preserves_scale_statistics() {
        let mut rng = SplitMix64::new(5);
        let values: Vec<f64> = (0..4000).map(|i| 2.0 + 0.5 * ((i % 7) as f64 - 3.0)).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let redrawn = redraw(&values, &mut rng);
        let rmean = redrawn.iter().sum::<f64>() / redrawn.len() as f64;
        assert!((mean - rmean).abs() < 0.1, "{mean} vs {rmean}");
        assert_ne!(values, redrawn);
    }

    #[test]
    fn redraw_of_constant_tensor_stays_constant() {
        let mut rng = SplitMix64::new(5);
        let redrawn = redraw(&[3.0, 3.0, 3.0], &mut rng);
        assert_eq!(redrawn, vec![3.0, 3.0, 3.0]);
    }
}
