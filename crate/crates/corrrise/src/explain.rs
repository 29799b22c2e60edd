//! The CorrRISE engine: explain a verification decision on a pair of images
//! by masking each image with a shared random mask stack, scoring the masked
//! image against the unmasked counterpart, and correlating per-pixel mask
//! visibility with the resulting similarity scores.
//!
//! The output is one signed saliency map per image: positive coefficients
//! mark regions the model finds similar between the two faces, negative
//! coefficients regions it finds dissimilar.

use crate::embedder::Embedder;
use crate::error::{Error, Result};
use crate::maskgen::{generate_stack, MaskGenConfig};
use crate::stats::{is_constant, ScoreSeries};
use crate::types::{ImageTensor, Mask, SaliencyMap};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Inputs of one explanation run.
pub struct ExplainRequest<'a> {
    pub image_a: &'a ImageTensor,
    pub image_b: &'a ImageTensor,
    pub backend: &'a dyn Embedder,
    pub mask_config: MaskGenConfig,
}

/// Everything a run produced, sufficient to reproduce it.
#[derive(Debug, Clone)]
pub struct ExplainResult {
    pub s_a: SaliencyMap,
    pub s_b: SaliencyMap,
    /// Cosine similarity of the unperturbed pair.
    pub score_unperturbed: f64,
    pub score_series_a: ScoreSeries,
    pub score_series_b: ScoreSeries,
    pub run: RunInfo,
}

/// Configuration echo recorded with every result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunInfo {
    pub mask_config: MaskGenConfig,
    pub backend_id: String,
    pub backend_deterministic: bool,
    /// Iteration indices dropped because the masked image produced a
    /// zero-norm embedding (no direction to score against).
    pub skipped_a: Vec<usize>,
    pub skipped_b: Vec<usize>,
}

/// Run the full masked-correlation loop for one image pair.
///
/// For each mask `M_k` the engine scores
/// `cos(embed(A * M_k), embed(B))` into series A and
/// `cos(embed(B * M_k), embed(A))` into series B; the unmasked embeddings
/// are computed once up front. Each image's map is then the per-pixel
/// Pearson correlation between its score series and the mask values at that
/// pixel. Both images share one mask stack, so the pair roles are exactly
/// symmetric: `explain(A, B).s_a` equals `explain(B, A).s_b` bit for bit.
///
/// Iterations run on parallel workers; scores land in preallocated slots by
/// iteration index, so results are identical for any worker count.
pub fn explain_pair(req: &ExplainRequest) -> Result<ExplainResult> {
    let (img_a, img_b, backend) = (req.image_a, req.image_b, req.backend);
    if img_a.height() != img_b.height()
        || img_a.width() != img_b.width()
        || img_a.channels() != img_b.channels()
    {
        return Err(Error::Contract(format!(
            "pair images differ in shape: {}x{}x{} vs {}x{}x{}",
            img_a.height(),
            img_a.width(),
            img_a.channels(),
            img_b.height(),
            img_b.width(),
            img_b.channels()
        )));
    }
    let (height, width) = (img_a.height(), img_a.width());
    req.mask_config.validate(height, width)?;

    let x_a = backend.embed(img_a)?;
    let x_b = backend.embed(img_b)?;
    if x_a.is_zero_norm() || x_b.is_zero_norm() {
        return Err(Error::Degenerate(
            "an unperturbed input produced a zero-norm embedding; nothing to explain".into(),
        ));
    }
    let score_unperturbed = x_a.cosine(&x_b)?;

    let masks = generate_stack(&req.mask_config, height, width)?;

    // One slot per iteration; None marks a degenerate masked embedding.
    let scores: Vec<(Option<f64>, Option<f64>)> = masks
        .par_iter()
        .enumerate()
        .map(|(k, mask)| -> Result<(Option<f64>, Option<f64>)> {
            let iter_err = |e: Error| Error::Backend(format!("iteration {k}: {e}"));
            let masked_a = img_a.apply_mask(mask)?;
            let masked_b = img_b.apply_mask(mask)?;
            let za = backend.embed(&masked_a).map_err(iter_err)?;
            let zb = backend.embed(&masked_b).map_err(iter_err)?;
            let sa = if za.is_zero_norm() { None } else { Some(za.cosine(&x_b)?) };
            let sb = if zb.is_zero_norm() { None } else { Some(zb.cosine(&x_a)?) };
            Ok((sa, sb))
        })
        .collect::<Result<Vec<_>>>()?;

    let (series_a, skipped_a) = split_kept(scores.iter().map(|s| s.0));
    let (series_b, skipped_b) = split_kept(scores.iter().map(|s| s.1));

    let s_a = correlate(&masks, &series_a, &skipped_a)?;
    let s_b = correlate(&masks, &series_b, &skipped_b)?;

    Ok(ExplainResult {
        s_a,
        s_b,
        score_unperturbed,
        score_series_a: ScoreSeries::new(series_a)?,
        score_series_b: ScoreSeries::new(series_b)?,
        run: RunInfo {
            mask_config: req.mask_config.clone(),
            backend_id: backend.id(),
            backend_deterministic: backend.deterministic(),
            skipped_a,
            skipped_b,
        },
    })
}

fn split_kept(slots: impl Iterator<Item = Option<f64>>) -> (Vec<f64>, Vec<usize>) {
    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for (k, slot) in slots.enumerate() {
        match slot {
            Some(v) => kept.push(v),
            None => skipped.push(k),
        }
    }
    (kept, skipped)
}

fn correlate(masks: &[Mask], scores: &[f64], skipped: &[usize]) -> Result<SaliencyMap> {
    if skipped.is_empty() {
        return saliency_from_scores(masks, scores);
    }
    if scores.len() < 2 {
        return Err(Error::Backend(format!(
            "only {} usable iterations after {} degenerate skips; need at least 2",
            scores.len(),
            skipped.len()
        )));
    }
    let kept: Vec<Mask> = masks
        .iter()
        .enumerate()
        .filter(|(k, _)| !skipped.contains(k))
        .map(|(_, m)| m.clone())
        .collect();
    saliency_from_scores(&kept, scores)
}

/// Per-pixel Pearson correlation between a score series and the mask values
/// at each pixel — the production correlation pass.
///
/// Semantics are exactly those of [`crate::stats::pearson_correlation`]
/// applied pixel by pixel (same two-pass centered accumulation, same exact
/// zero-variance convention); this version shares the score statistics
/// across pixels and parallelizes over rows.
pub fn saliency_from_scores(masks: &[Mask], scores: &[f64]) -> Result<SaliencyMap> {
    if masks.len() != scores.len() {
        return Err(Error::Contract(format!(
            "{} masks vs {} scores",
            masks.len(),
            scores.len()
        )));
    }
    if masks.len() < 2 {
        return Err(Error::Contract("correlation needs at least 2 iterations".into()));
    }
    let (height, width) = (masks[0].height(), masks[0].width());
    if masks.iter().any(|m| m.height() != height || m.width() != width) {
        return Err(Error::Contract("mask stack has inconsistent dimensions".into()));
    }

    // Score statistics are shared by every pixel.
    if is_constant(scores) {
        return Ok(SaliencyMap::zeros(height, width));
    }
    let n = scores.len() as f64;
    let mean_s = scores.iter().sum::<f64>() / n;
    let centered_s: Vec<f64> = scores.iter().map(|s| s - mean_s).collect();
    let ss_s: f64 = centered_s.iter().map(|d| d * d).sum();
    if ss_s == 0.0 {
        return Ok(SaliencyMap::zeros(height, width));
    }

    let mut data = vec![0.0f64; height * width];
    data.par_chunks_mut(width).enumerate().for_each(|(row, out)| {
        for (col, out_px) in out.iter_mut().enumerate() {
            let px = row * width + col;
            let mut min = f32::INFINITY;
            let mut max = f32::NEG_INFINITY;
            let mut sum = 0.0f64;
            for m in masks {
                let v = m.data()[px];
                min = min.min(v);
                max = max.max(v);
                sum += v as f64;
            }
            if min == max {
                *out_px = 0.0; // pixel never varied: no evidence
                continue;
            }
            let mean_m = sum / n;
            let mut cov = 0.0f64;
            let mut ss_m = 0.0f64;
            for (m, ds) in masks.iter().zip(&centered_s) {
                let dm = m.data()[px] as f64 - mean_m;
                cov += dm * ds;
                ss_m += dm * dm;
            }
            *out_px = if ss_m == 0.0 { 0.0 } else { (cov / (ss_m.sqrt() * ss_s.sqrt())).clamp(-1.0, 1.0) };
        }
    });
    SaliencyMap::new(height, width, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::{ConstantEmbedder, Rect, ToyRegionEmbedder};
    use crate::rng::SplitMix64;

    fn noise_image(h: usize, w: usize, seed: u64) -> ImageTensor {
        let mut rng = SplitMix64::new(seed);
        ImageTensor::new(
            h,
            w,
            1,
            (0..h * w).map(|_| (0.2 + 0.8 * rng.next_f64()) as f32).collect(),
        )
        .unwrap()
    }

    fn mask_cfg(n: usize, seed: u64, patch: usize) -> MaskGenConfig {
        MaskGenConfig {
            num_masks: n,
            patches_per_mask: 4,
            patch_size: patch,
            seed,
            blur_radius: 0,
        }
    }

    #[test]
    fn hand_evaluated_three_mask_map() {
        // 3 masks over a 2x2 image with scores [0.1, 0.5, 0.9]:
        //   pixel (0,0): series [1.0, 0.5, 0.0] -> r = -1
        //   pixel (0,1): series [0.0, 0.5, 1.0] -> r = +1
        //   pixel (1,0): series [0.0, 0.0, 0.5] -> r = sqrt(3)/2
        //   pixel (1,1): series [1.0, 1.0, 0.5] -> r = -sqrt(3)/2
        let masks = vec![
            Mask::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            Mask::new(2, 2, vec![0.5, 0.5, 0.0, 1.0]).unwrap(),
            Mask::new(2, 2, vec![0.0, 1.0, 0.5, 0.5]).unwrap(),
        ];
        let map = saliency_from_scores(&masks, &[0.1, 0.5, 0.9]).unwrap();
        let root3_half = 3.0f64.sqrt() / 2.0;
        assert!((map.get(0, 0) + 1.0).abs() < 1e-12);
        assert!((map.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((map.get(1, 0) - root3_half).abs() < 1e-12);
        assert!((map.get(1, 1) + root3_half).abs() < 1e-12);
    }

    #[test]
    fn production_pass_matches_naive_pearson() {
        let mut rng = SplitMix64::new(31);
        let (h, w, n) = (8, 8, 16);
        let masks: Vec<Mask> = (0..n)
            .map(|_| {
                Mask::new(h, w, (0..h * w).map(|_| rng.next_f64() as f32).collect()).unwrap()
            })
            .collect();
        let scores: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let map = saliency_from_scores(&masks, &scores).unwrap();
        for px in 0..h * w {
            let series: Vec<f64> = masks.iter().map(|m| m.data()[px] as f64).collect();
            let naive = crate::stats::pearson_correlation(&series, &scores).unwrap();
            assert!((map.data()[px] - naive).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_backend_gives_exactly_zero_maps() {
        let backend = ConstantEmbedder::new(8, 8, 1, vec![0.4, 0.6, 0.1]).unwrap();
        let a = noise_image(8, 8, 1);
        let b = noise_image(8, 8, 2);
        let req = ExplainRequest {
            image_a: &a,
            image_b: &b,
            backend: &backend,
            mask_config: mask_cfg(16, 7, 3),
        };
        let result = explain_pair(&req).unwrap();
        assert!(result.s_a.data().iter().all(|&v| v == 0.0));
        assert!(result.s_b.data().iter().all(|&v| v == 0.0));
        assert_eq!(result.score_unperturbed, 1.0);
    }

    #[test]
    fn pair_role_symmetry_is_bit_exact() {
        let backend = ToyRegionEmbedder::new(8, 8, 1, 2, None).unwrap();
        let a = noise_image(8, 8, 10);
        let b = noise_image(8, 8, 11);
        let cfg = mask_cfg(24, 5, 3);
        let ab = explain_pair(&ExplainRequest {
            image_a: &a,
            image_b: &b,
            backend: &backend,
            mask_config: cfg.clone(),
        })
        .unwrap();
        let ba = explain_pair(&ExplainRequest {
            image_a: &b,
            image_b: &a,
            backend: &backend,
            mask_config: cfg,
        })
        .unwrap();
        assert_eq!(ab.s_a, ba.s_b);
        assert_eq!(ab.s_b, ba.s_a);
        assert_eq!(ab.score_series_a, ba.score_series_b);
    }

    #[test]
    fn negated_scores_negate_the_map_bitwise() {
        let mut rng = SplitMix64::new(77);
        let masks: Vec<Mask> = (0..12)
            .map(|_| Mask::new(4, 4, (0..16).map(|_| rng.next_f64() as f32).collect()).unwrap())
            .collect();
        let scores: Vec<f64> = (0..12).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        let map = saliency_from_scores(&masks, &scores).unwrap();
        let flipped = saliency_from_scores(&masks, &negated).unwrap();
        assert_eq!(map.negated(), flipped);
    }

    #[test]
    fn determinism_across_worker_counts() {
        let backend = ToyRegionEmbedder::new(16, 16, 1, 4, None).unwrap();
        let a = noise_image(16, 16, 3);
        let b = noise_image(16, 16, 4);
        let cfg = mask_cfg(32, 9, 5);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                explain_pair(&ExplainRequest {
                    image_a: &a,
                    image_b: &b,
                    backend: &backend,
                    mask_config: cfg.clone(),
                })
                .unwrap()
            })
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one.s_a, four.s_a);
        assert_eq!(one.s_b, four.s_b);
        assert_eq!(one.score_series_a, four.score_series_a);
    }

    #[test]
    fn matching_pair_has_more_positive_than_negative_mass() {
        // identical pair: visibility raises similarity-to-self
        let backend = ToyRegionEmbedder::new(16, 16, 1, 4, None).unwrap();
        let img = noise_image(16, 16, 21);
        let result = explain_pair(&ExplainRequest {
            image_a: &img,
            image_b: &img,
            backend: &backend,
            mask_config: mask_cfg(200, 13, 4),
        })
        .unwrap();
        let pos: f64 = result.s_a.data().iter().filter(|&&v| v > 0.0).sum();
        let neg: f64 = -result.s_a.data().iter().filter(|&&v| v < 0.0).sum::<f64>();
        assert!(pos > neg, "positive mass {pos} vs negative mass {neg}");
    }

    #[test]
    fn dissimilar_pair_has_more_negative_than_positive_mass() {
        // A is bright in the top-left quadrant, B in the bottom-right, on a
        // shared dim background: revealing A's distinctive content moves it
        // away from B, so that content should read as dissimilarity.
        let (h, w) = (16, 16);
        let mut data_a = vec![0.1f32; h * w];
        let mut data_b = vec![0.1f32; h * w];
        for r in 0..8 {
            for c in 0..8 {
                data_a[r * w + c] = 0.9;
                data_b[(r + 8) * w + (c + 8)] = 0.9;
            }
        }
        let a = ImageTensor::new(h, w, 1, data_a).unwrap();
        let b = ImageTensor::new(h, w, 1, data_b).unwrap();
        let backend = ToyRegionEmbedder::new(h, w, 1, 4, None).unwrap();
        let result = explain_pair(&ExplainRequest {
            image_a: &a,
            image_b: &b,
            backend: &backend,
            mask_config: mask_cfg(300, 17, 4),
        })
        .unwrap();
        let pos: f64 = result.s_a.data().iter().filter(|&&v| v > 0.0).sum();
        let neg: f64 = -result.s_a.data().iter().filter(|&&v| v < 0.0).sum::<f64>();
        assert!(neg > pos, "negative mass {neg} vs positive mass {pos}");
    }

    #[test]
    fn monotone_evidence_inside_sensitive_region() {
        // mean positive saliency inside the region strictly exceeds mean
        // positive saliency outside, per seed, over 10 seeds
        let (h, w) = (32, 32);
        let region = Rect::new(0, 0, 16, 32).unwrap();
        let backend = ToyRegionEmbedder::new(h, w, 1, 4, Some(region)).unwrap();
        for seed in 0..10u64 {
            let img = noise_image(h, w, 100 + seed);
            let result = explain_pair(&ExplainRequest {
                image_a: &img,
                image_b: &img,
                backend: &backend,
                mask_config: mask_cfg(150, seed, 8),
            })
            .unwrap();
            let (mut in_sum, mut in_n, mut out_sum, mut out_n) = (0.0f64, 0usize, 0.0f64, 0usize);
            for r in 0..h {
                for c in 0..w {
                    let v = result.s_a.get(r, c).max(0.0);
                    if region.contains(r, c) {
                        in_sum += v;
                        in_n += 1;
                    } else {
                        out_sum += v;
                        out_n += 1;
                    }
                }
            }
            let (mean_in, mean_out) = (in_sum / in_n as f64, out_sum / out_n as f64);
            assert!(mean_in > mean_out, "seed {seed}: inside {mean_in} vs outside {mean_out}");
        }
    }

    #[test]
    fn too_few_masks_is_config_error() {
        let backend = ToyRegionEmbedder::new(8, 8, 1, 2, None).unwrap();
        let img = noise_image(8, 8, 1);
        let err = explain_pair(&ExplainRequest {
            image_a: &img,
            image_b: &img,
            backend: &backend,
            mask_config: mask_cfg(1, 0, 3),
        })
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn mismatched_pair_shapes_rejected() {
        let backend = ToyRegionEmbedder::new(8, 8, 1, 2, None).unwrap();
        let a = noise_image(8, 8, 1);
        let b = noise_image(4, 4, 1);
        let err = explain_pair(&ExplainRequest {
            image_a: &a,
            image_b: &b,
            backend: &backend,
            mask_config: mask_cfg(8, 0, 3),
        })
        .unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }
}
