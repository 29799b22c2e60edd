//! Deterministic desk-scale backends.
//!
//! [`ToyRegionEmbedder`] grid-average-pools an image (optionally restricted
//! to a sensitive region), so its decision-relevant pixels are known
//! analytically and localization claims can be checked against ground truth.
//! [`ConstantEmbedder`] ignores its input entirely. [`MixedToyEmbedder`] is
//! what parameter randomization turns a toy backend into: full-image pooling
//! followed by a seeded random mixing matrix.

use super::{check_input, Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::types::ImageTensor;

/// Axis-aligned rectangle in pixel coordinates, half-open: rows
/// `[y0, y1)`, columns `[x0, x1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Rect> {
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::Config(format!("empty rectangle ({x0},{y0},{x1},{y1})")));
        }
        Ok(Rect { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.y0 && row < self.y1 && col >= self.x0 && col < self.x1
    }
}

/// Grid-average pooling backend. The embedding is the per-cell, per-channel
/// mean over a `grid x grid` partition of the sensitive region (or of the
/// whole image when no region is set), so only pixels inside the region can
/// influence the output. `embedding_dim = grid * grid * channels`.
#[derive(Debug, Clone)]
pub struct ToyRegionEmbedder {
    height: usize,
    width: usize,
    channels: usize,
    grid: usize,
    region: Option<Rect>,
}

impl ToyRegionEmbedder {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        grid: usize,
        region: Option<Rect>,
    ) -> Result<Self> {
        if grid == 0 {
            return Err(Error::Config("grid must be positive".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Config(format!("channels must be 1 or 3, got {channels}")));
        }
        if let Some(r) = &region {
            if r.x1 > width || r.y1 > height {
                return Err(Error::Config(format!(
                    "region ({},{},{},{}) exceeds {height}x{width}",
                    r.x0, r.y0, r.x1, r.y1
                )));
            }
            if r.height() < grid || r.width() < grid {
                return Err(Error::Config(format!(
                    "region {}x{} too small for a {grid}x{grid} grid",
                    r.height(),
                    r.width()
                )));
            }
        } else if height < grid || width < grid {
            return Err(Error::Config(format!(
                "image {height}x{width} too small for a {grid}x{grid} grid"
            )));
        }
        Ok(ToyRegionEmbedder { height, width, channels, grid, region })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn region(&self) -> Option<Rect> {
        self.region
    }

    fn pooled(&self, img: &ImageTensor) -> Vec<f64> {
        let (y0, x0, rh, rw) = match &self.region {
            Some(r) => (r.y0, r.x0, r.height(), r.width()),
            None => (0, 0, self.height, self.width),
        };
        let g = self.grid;
        let mut out = Vec::with_capacity(g * g * self.channels);
        for cr in 0..g {
            let r_lo = y0 + cr * rh / g;
            let r_hi = y0 + (cr + 1) * rh / g;
            for cc in 0..g {
                let c_lo = x0 + cc * rw / g;
                let c_hi = x0 + (cc + 1) * rw / g;
                for ch in 0..self.channels {
                    let mut sum = 0.0f64;
                    for r in r_lo..r_hi {
                        for c in c_lo..c_hi {
                            sum += img.get(r, c, ch) as f64;
                        }
                    }
                    let count = ((r_hi - r_lo) * (c_hi - c_lo)) as f64;
                    out.push(sum / count);
                }
            }
        }
        out
    }
}

impl Embedder for ToyRegionEmbedder {
    fn embedding_dim(&self) -> usize {
        self.grid * self.grid * self.channels
    }

    fn input_size(&self) -> Option<(usize, usize)> {
        Some((self.height, self.width))
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn id(&self) -> String {
        match &self.region {
            Some(r) => format!(
                "toy-region:{}x{}x{}:grid={}:region={},{},{},{}",
                self.height, self.width, self.channels, self.grid, r.x0, r.y0, r.x1, r.y1
            ),
            None => format!(
                "toy-region:{}x{}x{}:grid={}",
                self.height, self.width, self.channels, self.grid
            ),
        }
    }

    fn embed(&self, img: &ImageTensor) -> Result<EmbeddingVector> {
        check_input(self, img)?;
        EmbeddingVector::new(self.pooled(img))
    }

    /// Randomizing a pooling backend re-draws everything it learned: the
    /// sensitive region (spatial attention) is dropped in favor of full-image
    /// pooling, and a seeded random-phase projection replaces the identity
    /// head. Input/output signature is unchanged.
    fn randomize_parameters(&self, seed: u64) -> Result<Box<dyn Embedder>> {
        let pool = ToyRegionEmbedder::new(self.height, self.width, self.channels, self.grid, None)?;
        Ok(Box::new(RandomizedToyEmbedder::new(pool, seed)))
    }
}

/// Frequency scale of the randomized head. Large enough that typical pooled
/// feature variation wraps the phase several times over, so no trace of the
/// trained similarity structure survives. A purely linear mixing matrix does
/// not achieve this: random linear maps approximately preserve cosine
/// geometry, leaving randomized similarities correlated with trained ones.
const RANDOMIZED_FREQ_SCALE: f64 = 40.0;

/// A toy backend with fake parameters: full-image pooling followed by
/// random-phase cosine features, `z_i = cos(w_i . p + phi_i)`, with the
/// projection matrix and phases drawn from the seed. Same input/output
/// signature as the backend it was derived from, but its similarity
/// structure no longer reflects any trained behavior.
#[derive(Debug, Clone)]
pub struct RandomizedToyEmbedder {
    pool: ToyRegionEmbedder,
    projection: Vec<f64>,
    phases: Vec<f64>,
    seed: u64,
}

impl RandomizedToyEmbedder {
    pub fn new(pool: ToyRegionEmbedder, seed: u64) -> Self {
        let dim = pool.embedding_dim();
        let mut rng = SplitMix64::new(seed);
        let projection =
            (0..dim * dim).map(|_| rng.next_gaussian() * RANDOMIZED_FREQ_SCALE).collect();
        let phases = (0..dim).map(|_| rng.next_f64() * std::f64::consts::TAU).collect();
        RandomizedToyEmbedder { pool, projection, phases, seed }
    }
}

impl Embedder for RandomizedToyEmbedder {
    fn embedding_dim(&self) -> usize {
        self.pool.embedding_dim()
    }

    fn input_size(&self) -> Option<(usize, usize)> {
        self.pool.input_size()
    }

    fn channels(&self) -> usize {
        self.pool.channels()
    }

    fn id(&self) -> String {
        format!("randomized({}, seed={})", self.pool.id(), self.seed)
    }

    fn embed(&self, img: &ImageTensor) -> Result<EmbeddingVector> {
        let pooled = self.pool.embed(img)?;
        let dim = pooled.dim();
        let features = (0..dim)
            .map(|row| {
                let mut angle = self.phases[row];
                for (col, &v) in pooled.data().iter().enumerate() {
                    angle += self.projection[row * dim + col] * v;
                }
                angle.cos()
            })
            .collect();
        EmbeddingVector::new(features)
    }

    fn randomize_parameters(&self, seed: u64) -> Result<Box<dyn Embedder>> {
        Ok(Box::new(RandomizedToyEmbedder::new(self.pool.clone(), seed)))
    }
}

/// Grid-average pooling followed by a rectifying gate: each cell outputs
/// `max(0, mean - gate)`. Cells whose mean falls below the gate go exactly
/// dark, the way convolutional features die under occlusion, so sparse or
/// diluted reveals do not preserve the embedding direction the way they do
/// through a purely linear pooler. This is the backend the evaluation suite
/// uses; sensitivity is still analytic (pixels in a dead cell have exactly
/// zero influence).
#[derive(Debug, Clone)]
pub struct GatedToyEmbedder {
    pool: ToyRegionEmbedder,
    gate: f64,
}

impl GatedToyEmbedder {
    pub fn new(pool: ToyRegionEmbedder, gate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gate) {
            return Err(Error::Config(format!("gate must be in [0, 1), got {gate}")));
        }
        Ok(GatedToyEmbedder { pool, gate })
    }
}

impl Embedder for GatedToyEmbedder {
    fn embedding_dim(&self) -> usize {
        self.pool.embedding_dim()
    }

    fn input_size(&self) -> Option<(usize, usize)> {
        self.pool.input_size()
    }

    fn channels(&self) -> usize {
        self.pool.channels()
    }

    fn id(&self) -> String {
        format!("{}:gate={}", self.pool.id().replace("toy-region", "toy-gated"), self.gate)
    }

    fn embed(&self, img: &ImageTensor) -> Result<EmbeddingVector> {
        let pooled = self.pool.embed(img)?;
        EmbeddingVector::new(pooled.data().iter().map(|&v| (v - self.gate).max(0.0)).collect())
    }

    fn randomize_parameters(&self, seed: u64) -> Result<Box<dyn Embedder>> {
        self.pool.randomize_parameters(seed)
    }
}

/// Backend that returns the same vector for every input. Exists to verify
/// the zero-variance convention end to end: constant scores must produce
/// exactly-zero saliency.
#[derive(Debug, Clone)]
pub struct ConstantEmbedder {
    height: usize,
    width: usize,
    channels: usize,
    vector: Vec<f64>,
}

impl ConstantEmbedder {
    pub fn new(height: usize, width: usize, channels: usize, vector: Vec<f64>) -> Result<Self> {
        if vector.is_empty() || vector.iter().all(|&v| v == 0.0) {
            return Err(Error::Config("constant embedder needs a nonzero vector".into()));
        }
        Ok(ConstantEmbedder { height, width, channels, vector })
    }
}

impl Embedder for ConstantEmbedder {
    fn embedding_dim(&self) -> usize {
        self.vector.len()
    }

    fn input_size(&self) -> Option<(usize, usize)> {
        Some((self.height, self.width))
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn id(&self) -> String {
        format!("toy-constant:{}x{}x{}:dim={}", self.height, self.width, self.channels, self.vector.len())
    }

    fn embed(&self, img: &ImageTensor) -> Result<EmbeddingVector> {
        check_input(self, img)?;
        EmbeddingVector::new(self.vector.clone())
    }

    fn randomize_parameters(&self, _seed: u64) -> Result<Box<dyn Embedder>> {
        Err(Error::Backend("constant backend has no parameters to randomize".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image(h: usize, w: usize, c: usize) -> ImageTensor {
        let n = h * w * c;
        ImageTensor::new(h, w, c, (0..n).map(|i| i as f32 / n as f32).collect()).unwrap()
    }

    #[test]
    fn constant_gray_pools_to_constant_embedding() {
        let backend = ToyRegionEmbedder::new(8, 8, 1, 2, None).unwrap();
        let img = ImageTensor::constant(8, 8, 1, 0.5).unwrap();
        let e = backend.embed(&img).unwrap();
        assert_eq!(e.data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn region_exclusivity() {
        // two images identical on the left half, different on the right
        let backend =
            ToyRegionEmbedder::new(8, 8, 1, 2, Some(Rect::new(0, 0, 4, 8).unwrap())).unwrap();
        let mut data_a = vec![0.2f32; 64];
        let mut data_b = vec![0.2f32; 64];
        for r in 0..8 {
            for c in 0..4 {
                let v = ((r * 4 + c) as f32) / 32.0;
                data_a[r * 8 + c] = v;
                data_b[r * 8 + c] = v;
            }
            for c in 4..8 {
                data_a[r * 8 + c] = 0.9;
                data_b[r * 8 + c] = 0.1;
            }
        }
        let a = ImageTensor::new(8, 8, 1, data_a).unwrap();
        let b = ImageTensor::new(8, 8, 1, data_b).unwrap();
        assert_eq!(backend.embed(&a).unwrap(), backend.embed(&b).unwrap());
    }

    #[test]
    fn out_of_region_pixel_never_changes_embedding() {
        let region = Rect::new(0, 0, 4, 8).unwrap();
        let backend = ToyRegionEmbedder::new(8, 8, 1, 2, Some(region)).unwrap();
        let img = gradient_image(8, 8, 1);
        let base = backend.embed(&img).unwrap();
        for r in 0..8 {
            for c in 4..8 {
                let mut data = img.data().to_vec();
                data[r * 8 + c] = 1.0 - data[r * 8 + c];
                let perturbed = ImageTensor::new(8, 8, 1, data).unwrap();
                assert_eq!(backend.embed(&perturbed).unwrap(), base);
            }
        }
    }

    #[test]
    fn embed_is_deterministic() {
        let backend = ToyRegionEmbedder::new(8, 8, 3, 2, None).unwrap();
        let img = gradient_image(8, 8, 3);
        assert_eq!(backend.embed(&img).unwrap(), backend.embed(&img).unwrap());
    }

    #[test]
    fn size_mismatch_is_contract_error() {
        let backend = ToyRegionEmbedder::new(8, 8, 1, 2, None).unwrap();
        let img = ImageTensor::constant(4, 4, 1, 0.5).unwrap();
        assert!(matches!(backend.embed(&img), Err(Error::Contract(_))));
    }

    #[test]
    fn randomized_backend_keeps_signature() {
        let backend = ToyRegionEmbedder::new(8, 8, 1, 2, Some(Rect::new(0, 0, 4, 8).unwrap()))
            .unwrap();
        let rand = backend.randomize_parameters(7).unwrap();
        assert_eq!(rand.embedding_dim(), backend.embedding_dim());
        assert_eq!(rand.input_size(), backend.input_size());
        assert_eq!(rand.channels(), backend.channels());
    }

    #[test]
    fn randomization_is_seed_deterministic() {
        let backend = ToyRegionEmbedder::new(8, 8, 1, 2, None).unwrap();
        let img = gradient_image(8, 8, 1);
        let a = backend.randomize_parameters(123).unwrap().embed(&img).unwrap();
        let b = backend.randomize_parameters(123).unwrap().embed(&img).unwrap();
        assert_eq!(a, b);
        let c = backend.randomize_parameters(124).unwrap().embed(&img).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn constant_backend_ignores_input_and_rejects_randomization() {
        let backend = ConstantEmbedder::new(4, 4, 1, vec![1.0, 2.0]).unwrap();
        let a = backend.embed(&ImageTensor::constant(4, 4, 1, 0.1).unwrap()).unwrap();
        let b = backend.embed(&gradient_image(4, 4, 1)).unwrap();
        assert_eq!(a, b);
        assert!(backend.randomize_parameters(0).is_err());
    }

    #[test]
    fn similarity_decorrelation_after_randomization() {
        // Monte-Carlo: over 100 random image pairs, similarity under the
        // trained toy backend and under its randomized version should be
        // essentially unrelated.
        let backend = ToyRegionEmbedder::new(16, 16, 1, 4, None).unwrap();
        let randomized = backend.randomize_parameters(2024).unwrap();
        let mut rng = SplitMix64::new(555);
        let mut orig = Vec::new();
        let mut rand = Vec::new();
        for _ in 0..100 {
            let a = ImageTensor::new(16, 16, 1, (0..256).map(|_| rng.next_f64() as f32).collect())
                .unwrap();
            let b = ImageTensor::new(16, 16, 1, (0..256).map(|_| rng.next_f64() as f32).collect())
                .unwrap();
            let (ea, eb) = (backend.embed(&a).unwrap(), backend.embed(&b).unwrap());
            let (ra, rb) = (randomized.embed(&a).unwrap(), randomized.embed(&b).unwrap());
            orig.push(ea.cosine(&eb).unwrap());
            rand.push(ra.cosine(&rb).unwrap());
        }
        let corr = crate::stats::pearson_correlation(&orig, &rand).unwrap();
        assert!(corr.abs() <= 0.3, "similarity correlation {corr} after randomization");
    }
}
