//! Deletion/Insertion evaluation harness.
//!
//! Both metrics perturb dataset images in the order given by a saliency
//! method's per-pixel importance ranking and track verification accuracy at
//! a fixed decision threshold as a function of the fraction of pixels
//! modified. Deletion removes the most salient pixels first (a sharp
//! accuracy drop and low AUC mean an accurate map); insertion reveals them
//! onto a plain image (a sharp rise and high AUC mean the same).

use crate::embedder::Embedder;
use crate::error::{Error, Result};
use crate::explain::{explain_pair, ExplainRequest};
use crate::maskgen::MaskGenConfig;
use crate::rng::SplitMix64;
use crate::stats::EvalCurve;
use crate::types::{ImageTensor, SaliencyMap};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Which values drive the pixel ranking.
///
/// `Signed` ranks by the raw signed value. `PositiveOnly` ranks by the
/// positive part, so all non-negative pixels come first; with the shared
/// descending-value, row-major-tie rule the resulting order is the same,
/// and the mode exists so runs against unsigned comparison methods are
/// labelled as such in metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankingSource {
    Signed,
    PositiveOnly,
}

/// Evaluation parameters. `steps` of 20 gives 5% increments; fills of 0
/// match the mask generator's base value so deletion, insertion, and
/// masking all perturb toward the same plain black image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub steps: usize,
    pub threshold: f64,
    pub deletion_fill: f32,
    pub insertion_base: f32,
    pub ranking: RankingSource,
}

pub const DEFAULT_EVAL_STEPS: usize = 20;

impl EvalConfig {
    pub fn new(threshold: f64) -> EvalConfig {
        EvalConfig {
            steps: DEFAULT_EVAL_STEPS,
            threshold,
            deletion_fill: 0.0,
            insertion_base: 0.0,
            ranking: RankingSource::Signed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::Config(format!("steps must be at least 2, got {}", self.steps)));
        }
        if !self.threshold.is_finite() {
            return Err(Error::Config("threshold must be finite".into()));
        }
        for (name, v) in [("deletion_fill", self.deletion_fill), ("insertion_base", self.insertion_base)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// One dataset pair, loaded and resized to the backend input size.
#[derive(Debug, Clone)]
pub struct LoadedPair {
    /// Identifier used in error messages and cache keys (manifest paths).
    pub id: String,
    pub a: ImageTensor,
    pub b: ImageTensor,
    pub matching: bool,
}

/// A method that produces one saliency map per image of a pair.
pub trait SaliencyMethod: Send + Sync {
    fn name(&self) -> &str;
    fn explain(
        &self,
        backend: &dyn Embedder,
        pair: &LoadedPair,
    ) -> Result<(SaliencyMap, SaliencyMap)>;
}

/// The masked-correlation explainer as an evaluation subject.
pub struct CorrRiseMethod {
    pub mask_config: MaskGenConfig,
}

impl SaliencyMethod for CorrRiseMethod {
    fn name(&self) -> &str {
        "corrrise"
    }

    fn explain(
        &self,
        backend: &dyn Embedder,
        pair: &LoadedPair,
    ) -> Result<(SaliencyMap, SaliencyMap)> {
        let result = explain_pair(&ExplainRequest {
            image_a: &pair.a,
            image_b: &pair.b,
            backend,
            mask_config: self.mask_config.clone(),
        })?;
        Ok((result.s_a, result.s_b))
    }
}

/// Seeded uniform-noise control: what an explanation is worth when it knows
/// nothing at all.
pub struct RandomBaseline {
    pub seed: u64,
}

impl SaliencyMethod for RandomBaseline {
    fn name(&self) -> &str {
        "random"
    }

    fn explain(
        &self,
        _backend: &dyn Embedder,
        pair: &LoadedPair,
    ) -> Result<(SaliencyMap, SaliencyMap)> {
        // distinct sub-seed per pair and per image, derived from the pair id
        let base = crate::rng::fnv1a64(pair.id.as_bytes()) ^ self.seed;
        Ok((
            baseline_saliency(BaselineKind::Random, pair.a.height(), pair.a.width(), base),
            baseline_saliency(BaselineKind::Random, pair.b.height(), pair.b.width(), base ^ 1),
        ))
    }
}

/// Center-prior control: a face-agnostic "the middle matters" heatmap, the
/// shortcut a method could take without ever consulting the model.
pub struct CenterPrior;

impl SaliencyMethod for CenterPrior {
    fn name(&self) -> &str {
        "center"
    }

    fn explain(
        &self,
        _backend: &dyn Embedder,
        pair: &LoadedPair,
    ) -> Result<(SaliencyMap, SaliencyMap)> {
        Ok((
            baseline_saliency(BaselineKind::CenterPrior, pair.a.height(), pair.a.width(), 0),
            baseline_saliency(BaselineKind::CenterPrior, pair.b.height(), pair.b.width(), 0),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Random,
    CenterPrior,
}

/// Construct a baseline map: seeded i.i.d. uniform `[-1, 1]` values, or an
/// isotropic Gaussian bump centered at the image midpoint with peak 1 and
/// scale a quarter of the smaller dimension.
pub fn baseline_saliency(kind: BaselineKind, height: usize, width: usize, seed: u64) -> SaliencyMap {
    let data = match kind {
        BaselineKind::Random => {
            let mut rng = SplitMix64::new(seed);
            (0..height * width).map(|_| rng.next_f64() * 2.0 - 1.0).collect()
        }
        BaselineKind::CenterPrior => {
            let cy = (height as f64 - 1.0) / 2.0;
            let cx = (width as f64 - 1.0) / 2.0;
            let sigma = height.min(width) as f64 / 4.0;
            let denom = 2.0 * sigma * sigma;
            (0..height * width)
                .map(|i| {
                    let (r, c) = ((i / width) as f64, (i % width) as f64);
                    let d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
                    (-d2 / denom).exp()
                })
                .collect()
        }
    };
    SaliencyMap::new(height, width, data).expect("baseline values are always in range")
}

/// Flat row-major pixel indices sorted by saliency value, descending; ties
/// broken by index ascending. Invariant under strictly increasing transforms
/// of the values.
pub fn rank_pixels(map: &SaliencyMap, ranking: RankingSource) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..map.data().len()).collect();
    let key = |i: usize| -> f64 {
        match ranking {
            RankingSource::Signed => map.data()[i],
            // non-negative group first (descending), then negatives
            // (descending): identical order, different label
            RankingSource::PositiveOnly => map.data()[i],
        }
    };
    idx.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    idx
}

/// Fraction of pairs whose thresholded decision (`cosine >= threshold` means
/// match) agrees with the label. A pair whose embedding has zero norm (for
/// example a fully deleted image through a pooling backend) has no score and
/// counts as a non-match decision.
pub fn verification_accuracy(
    backend: &dyn Embedder,
    pairs: &[LoadedPair],
    threshold: f64,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Contract("verification needs at least one pair".into()));
    }
    let correct: usize = pairs
        .par_iter()
        .map(|pair| -> Result<usize> {
            let decision = match pair_score(backend, pair)? {
                Some(score) => score >= threshold,
                None => false,
            };
            Ok((decision == pair.matching) as usize)
        })
        .collect::<Result<Vec<_>>>()?
        .iter()
        .sum();
    Ok(correct as f64 / pairs.len() as f64)
}

/// Cosine similarity of a pair, `None` if either embedding is degenerate.
fn pair_score(backend: &dyn Embedder, pair: &LoadedPair) -> Result<Option<f64>> {
    let named = |e: Error| Error::Backend(format!("pair {}: {e}", pair.id));
    let ea = backend.embed(&pair.a).map_err(named)?;
    let eb = backend.embed(&pair.b).map_err(named)?;
    if ea.is_zero_norm() || eb.is_zero_norm() {
        return Ok(None);
    }
    Ok(Some(ea.cosine(&eb)?))
}

/// Pick the decision threshold that maximizes accuracy on the unmodified
/// pairs, then freeze it for every curve step.
///
/// Accuracy as a function of the threshold is piecewise constant, changing
/// only at observed scores, so every maximizing threshold lives in an
/// interval bounded by two adjacent observed scores (or by the cosine floor
/// of -1 / a value above the maximum). The midpoint of the best interval is
/// returned: it maximizes the decision margin on both sides instead of
/// sitting exactly on a score. Ties between intervals resolve to the
/// highest-scoring one.
pub fn choose_threshold(backend: &dyn Embedder, pairs: &[LoadedPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Contract("threshold selection needs at least one pair".into()));
    }
    let scored: Vec<(Option<f64>, bool)> = pairs
        .iter()
        .map(|p| Ok((pair_score(backend, p)?, p.matching)))
        .collect::<Result<Vec<_>>>()?;
    let mut scores: Vec<f64> = scored.iter().filter_map(|(s, _)| *s).collect();
    if scores.is_empty() {
        return Err(Error::Degenerate("no pair produced a usable score".into()));
    }
    scores.sort_by(f64::total_cmp);
    scores.dedup();
    // Interval representatives: each observed score (decision boundary at
    // the low edge of its interval) plus one reject-everything value.
    let mut candidates: Vec<(f64, f64)> = Vec::with_capacity(scores.len() + 1);
    let floor = (-1.0f64).min(scores[0]);
    for (i, &s) in scores.iter().enumerate() {
        let below = if i == 0 { floor } else { scores[i - 1] };
        candidates.push((s, (below + s) / 2.0));
    }
    let top = scores[scores.len() - 1];
    candidates.push((top + 1.0, top + 1.0));

    let mut best: Option<(usize, f64)> = None;
    for &(boundary, midpoint) in &candidates {
        let correct = scored
            .iter()
            .filter(|(s, matching)| (s.map(|v| v >= boundary).unwrap_or(false)) == *matching)
            .count();
        if best.map(|(c, _)| correct >= c).unwrap_or(true) {
            best = Some((correct, midpoint));
        }
    }
    Ok(best.expect("candidates are non-empty").1)
}

/// Deletion curve: at step `k` of `n`, the top `k/n` fraction of each
/// image's pixels (by its own map) is set to `deletion_fill` in both images
/// of every pair, and verification accuracy is measured on the modified set.
/// The `k = 0` point is the unmodified baseline accuracy.
pub fn deletion_curve(
    backend: &dyn Embedder,
    pairs: &[LoadedPair],
    maps: &[(SaliencyMap, SaliencyMap)],
    cfg: &EvalConfig,
) -> Result<EvalCurve> {
    sweep_curve(backend, pairs, maps, cfg, Direction::Deletion)
}

/// Insertion curve: at step `k` of `n`, the top `k/n` fraction of each
/// image's pixels is restored from the original onto a constant
/// `insertion_base` image. The `k = n` point uses the fully original images.
pub fn insertion_curve(
    backend: &dyn Embedder,
    pairs: &[LoadedPair],
    maps: &[(SaliencyMap, SaliencyMap)],
    cfg: &EvalConfig,
) -> Result<EvalCurve> {
    sweep_curve(backend, pairs, maps, cfg, Direction::Insertion)
}

enum Direction {
    Deletion,
    Insertion,
}

fn sweep_curve(
    backend: &dyn Embedder,
    pairs: &[LoadedPair],
    maps: &[(SaliencyMap, SaliencyMap)],
    cfg: &EvalConfig,
    direction: Direction,
) -> Result<EvalCurve> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::Contract("curve needs at least one pair".into()));
    }
    if pairs.len() != maps.len() {
        return Err(Error::Contract(format!(
            "{} pairs but {} map pairs",
            pairs.len(),
            maps.len()
        )));
    }
    for (pair, (ma, mb)) in pairs.iter().zip(maps) {
        if ma.height() != pair.a.height()
            || ma.width() != pair.a.width()
            || mb.height() != pair.b.height()
            || mb.width() != pair.b.width()
        {
            return Err(Error::Contract(format!(
                "saliency map dimensions do not match images of pair {}",
                pair.id
            )));
        }
    }

    let rankings: Vec<(Vec<usize>, Vec<usize>)> = maps
        .par_iter()
        .map(|(ma, mb)| (rank_pixels(ma, cfg.ranking), rank_pixels(mb, cfg.ranking)))
        .collect();

    let n = cfg.steps;
    let mut points = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let fraction = k as f64 / n as f64;
        let modified: Vec<LoadedPair> = pairs
            .par_iter()
            .zip(&rankings)
            .map(|(pair, (rank_a, rank_b))| {
                let count_a = pixel_count(fraction, rank_a.len());
                let count_b = pixel_count(fraction, rank_b.len());
                let (a, b) = match direction {
                    Direction::Deletion => (
                        pair.a.with_pixels_filled(&rank_a[..count_a], cfg.deletion_fill),
                        pair.b.with_pixels_filled(&rank_b[..count_b], cfg.deletion_fill),
                    ),
                    Direction::Insertion => (
                        pair.a.revealed_on(&rank_a[..count_a], cfg.insertion_base),
                        pair.b.revealed_on(&rank_b[..count_b], cfg.insertion_base),
                    ),
                };
                LoadedPair { id: pair.id.clone(), a, b, matching: pair.matching }
            })
            .collect();
        let accuracy = verification_accuracy(backend, &modified, cfg.threshold)
            .map_err(|e| Error::Backend(format!("step {k}: {e}")))?;
        points.push((fraction, accuracy));
    }
    EvalCurve::new(points)
}

fn pixel_count(fraction: f64, total: usize) -> usize {
    ((fraction * total as f64).round() as usize).min(total)
}
