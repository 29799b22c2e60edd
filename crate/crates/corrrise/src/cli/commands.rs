//! Subcommand drivers: wire the filesystem, backend, engine, and metrics
//! together and write every artifact a run produces.

use super::{
    build_backend, EvaluateArgs, ExplainArgs, GenmasksArgs, MethodArg, RankingArg, Resolved,
    SanityArgs,
};
use crate::embedder::Embedder;
use crate::error::{Error, Result};
use crate::explain::{explain_pair, ExplainRequest};
use crate::io;
use crate::io::runmeta::{ExplainMetadata, SanityMetadata};
use crate::io::RunMetadata;
use crate::maskgen::{generate_stack, MaskGenConfig};
use crate::metrics::{
    choose_threshold, deletion_curve, insertion_curve, CenterPrior, CorrRiseMethod, EvalConfig,
    LoadedPair, RandomBaseline, RankingSource, SaliencyMethod, DEFAULT_EVAL_STEPS,
};
use crate::rng::fnv1a64;
use crate::stats::{pearson_correlation, EvalCurve};
use crate::types::SaliencyMap;
use std::path::Path;

fn ensure_out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn record_common_decisions(meta: &mut RunMetadata) {
    let d = &mut meta.decisions;
    d.insert("mask_base_value".into(), "0".into());
    d.insert("mask_merge".into(), "per-pixel maximum".into());
    d.insert("mask_rng".into(), "splitmix64; per patch: row, col, value".into());
    d.insert("patch_value".into(), "one uniform draw per patch".into());
    d.insert("zero_norm_embeddings".into(), "iteration skipped and recorded".into());
}

fn load_pair_images(
    manifest: &io::Manifest,
    backend: &dyn Embedder,
    crop: io::CropMode,
) -> Result<Vec<LoadedPair>> {
    manifest
        .records
        .iter()
        .map(|rec| {
            let a = io::load_image(
                &manifest.resolve(&rec.path_a),
                backend.input_size(),
                crop,
                Some(backend.channels()),
            )?;
            let b = io::load_image(
                &manifest.resolve(&rec.path_b),
                backend.input_size(),
                crop,
                Some(backend.channels()),
            )?;
            Ok(LoadedPair {
                id: format!("{}|{}", rec.path_a.display(), rec.path_b.display()),
                a,
                b,
                matching: rec.matching,
            })
        })
        .collect()
}

pub fn cmd_explain(args: ExplainArgs) -> Result<()> {
    let (resolved, file) = args.common.resolve("corrrise-out")?;
    let model = resolved.require_model()?;
    let image_a_path = file
        .resolve_path(args.image_a.clone(), "image-a")
        .ok_or_else(|| Error::Config("--image-a is required".into()))?;
    let image_b_path = file
        .resolve_path(args.image_b.clone(), "image-b")
        .ok_or_else(|| Error::Config("--image-b is required".into()))?;
    let threshold = file.resolve(args.threshold, "threshold")?;

    let backend = build_backend(&model, resolved.preprocessing.clone())?;
    let image_a = io::load_image(
        &image_a_path,
        backend.input_size(),
        resolved.crop,
        Some(backend.channels()),
    )?;
    let image_b = io::load_image(
        &image_b_path,
        backend.input_size(),
        resolved.crop,
        Some(backend.channels()),
    )?;

    let mask_config = resolved.mask_config(image_a.height(), image_a.width());
    let pool = resolved.thread_pool()?;
    let result = pool.install(|| {
        explain_pair(&ExplainRequest {
            image_a: &image_a,
            image_b: &image_b,
            backend: backend.as_ref(),
            mask_config: mask_config.clone(),
        })
    })?;

    ensure_out_dir(&resolved.out)?;
    let out = &resolved.out;
    io::save_saliency(&result.s_a, &out.join("s_a.salm"))?;
    io::save_saliency(&result.s_b, &out.join("s_b.salm"))?;
    let heatmaps = [
        ("s_a_positive.png", &image_a, &result.s_a, io::HeatmapMode::Positive),
        ("s_a_negative.png", &image_a, &result.s_a, io::HeatmapMode::Negative),
        ("s_b_positive.png", &image_b, &result.s_b, io::HeatmapMode::Positive),
        ("s_b_negative.png", &image_b, &result.s_b, io::HeatmapMode::Negative),
    ];
    for (name, img, map, mode) in heatmaps {
        io::render_heatmap(img, map, mode, &out.join(name))?;
    }

    let mut meta = RunMetadata::new("explain", resolved.seed, resolved.workers, &model, &backend.id());
    meta.preprocessing = resolved.preprocessing.clone();
    meta.mask_config = Some(mask_config);
    record_common_decisions(&mut meta);
    meta.explain = Some(ExplainMetadata {
        image_a: image_a_path.display().to_string(),
        image_b: image_b_path.display().to_string(),
        score_unperturbed: result.score_unperturbed,
        threshold,
        decision: threshold.map(|t| {
            if result.score_unperturbed >= t { "match".to_string() } else { "nonmatch".to_string() }
        }),
        skipped_iterations_a: result.run.skipped_a.len(),
        skipped_iterations_b: result.run.skipped_b.len(),
    });
    meta.outputs = vec![
        "s_a.salm".into(),
        "s_b.salm".into(),
        "s_a_positive.png".into(),
        "s_a_negative.png".into(),
        "s_b_positive.png".into(),
        "s_b_negative.png".into(),
    ];
    meta.write(&out.join("run.json"))
}

fn method_instances(
    methods: &[MethodArg],
    mask_config: &MaskGenConfig,
    seed: u64,
) -> Vec<Box<dyn SaliencyMethod>> {
    let chosen: Vec<MethodArg> = if methods.is_empty() {
        vec![MethodArg::Corrrise, MethodArg::Random, MethodArg::Center]
    } else {
        methods.to_vec()
    };
    chosen
        .into_iter()
        .map(|m| -> Box<dyn SaliencyMethod> {
            match m {
                MethodArg::Corrrise => {
                    Box::new(CorrRiseMethod { mask_config: mask_config.clone() })
                }
                MethodArg::Random => Box::new(RandomBaseline { seed }),
                MethodArg::Center => Box::new(CenterPrior),
            }
        })
        .collect()
}

/// Compute (or load from cache) saliency maps for every pair.
fn maps_for_method(
    method: &dyn SaliencyMethod,
    backend: &dyn Embedder,
    pairs: &[LoadedPair],
    cache_dir: Option<&Path>,
    cache_salt: &str,
) -> Result<Vec<(SaliencyMap, SaliencyMap)>> {
    pairs
        .iter()
        .map(|pair| {
            let key = fnv1a64(
                format!(
                    "{}|{}|{}|{}x{}x{}",
                    method.name(),
                    cache_salt,
                    pair.id,
                    pair.a.height(),
                    pair.a.width(),
                    pair.a.channels()
                )
                .as_bytes(),
            );
            let cached = cache_dir.map(|dir| {
                (
                    dir.join(format!("{}-{key:016x}-a.salm", method.name())),
                    dir.join(format!("{}-{key:016x}-b.salm", method.name())),
                )
            });
            if let Some((path_a, path_b)) = &cached {
                if path_a.exists() && path_b.exists() {
                    return Ok((io::load_saliency(path_a)?, io::load_saliency(path_b)?));
                }
            }
            let maps = method.explain(backend, pair)?;
            if let Some((path_a, path_b)) = &cached {
                io::save_saliency(&maps.0, path_a)?;
                io::save_saliency(&maps.1, path_b)?;
            }
            Ok(maps)
        })
        .collect()
}

fn write_curve_csv(path: &Path, curve: &EvalCurve) -> Result<()> {
    let mut text = String::from("step,fraction,accuracy\n");
    for (step, (fraction, accuracy)) in curve.points().iter().enumerate() {
        text.push_str(&format!("{step},{fraction},{accuracy}\n"));
    }
    io::write_atomic(path, text.as_bytes())
}

pub fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let (resolved, file) = args.common.resolve("corrrise-out")?;
    let model = resolved.require_model()?;
    let manifest_path = file
        .resolve_path(args.manifest.clone(), "manifest")
        .ok_or_else(|| Error::Config("--manifest is required".into()))?;
    let steps = file.resolve(args.steps, "steps")?.unwrap_or(DEFAULT_EVAL_STEPS);
    let threshold_flag = file.resolve(args.threshold, "threshold")?;
    let deletion_fill = file.resolve(args.deletion_fill, "deletion-fill")?.unwrap_or(0.0);
    let insertion_base = file.resolve(args.insertion_base, "insertion-base")?.unwrap_or(0.0);
    let ranking = match file.resolve(args.ranking, "ranking")? {
        Some(RankingArg::PositiveOnly) => RankingSource::PositiveOnly,
        _ => RankingSource::Signed,
    };

    let backend = build_backend(&model, resolved.preprocessing.clone())?;
    let manifest = io::load_manifest(&manifest_path)?;
    let pairs = load_pair_images(&manifest, backend.as_ref(), resolved.crop)?;
    if pairs.is_empty() {
        return Err(Error::Data(format!("{}: manifest has no pairs", manifest_path.display())));
    }

    let pool = resolved.thread_pool()?;
    pool.install(|| -> Result<()> {
        let threshold = match threshold_flag {
            Some(t) => t,
            None => choose_threshold(backend.as_ref(), &pairs)?,
        };
        let eval_config = EvalConfig {
            steps,
            threshold,
            deletion_fill: deletion_fill as f32,
            insertion_base: insertion_base as f32,
            ranking,
        };
        eval_config.validate()?;

        // The curve protocol follows the fixed-threshold verification task:
        // the threshold is chosen on the full manifest, curves are swept on
        // the matching pairs.
        let matching: Vec<LoadedPair> = pairs.iter().filter(|p| p.matching).cloned().collect();
        if matching.is_empty() {
            return Err(Error::Data(format!(
                "{}: no matching pairs to evaluate",
                manifest_path.display()
            )));
        }

        ensure_out_dir(&resolved.out)?;
        let cache_dir = if args.no_cache { None } else { Some(resolved.out.join("cache")) };
        if let Some(dir) = &cache_dir {
            ensure_out_dir(dir)?;
        }

        let (h, w) = (matching[0].a.height(), matching[0].a.width());
        let mask_config = resolved.mask_config(h, w);
        let methods = method_instances(&args.method, &mask_config, resolved.seed);
        let cache_salt = format!(
            "{}|seed={}|masks={}",
            backend.id(),
            resolved.seed,
            serde_json::to_string(&mask_config).unwrap_or_default()
        );

        let mut summary = String::from("method,deletion_auc,insertion_auc\n");
        let mut outputs: Vec<String> = Vec::new();
        for method in &methods {
            let maps = maps_for_method(
                method.as_ref(),
                backend.as_ref(),
                &matching,
                cache_dir.as_deref(),
                &cache_salt,
            )?;
            let deletion = deletion_curve(backend.as_ref(), &matching, &maps, &eval_config)?;
            let insertion = insertion_curve(backend.as_ref(), &matching, &maps, &eval_config)?;
            let del_name = format!("{}_deletion.csv", method.name());
            let ins_name = format!("{}_insertion.csv", method.name());
            write_curve_csv(&resolved.out.join(&del_name), &deletion)?;
            write_curve_csv(&resolved.out.join(&ins_name), &insertion)?;
            summary.push_str(&format!(
                "{},{},{}\n",
                method.name(),
                deletion.auc_percent(),
                insertion.auc_percent()
            ));
            outputs.push(del_name);
            outputs.push(ins_name);
        }
        io::write_atomic(&resolved.out.join("summary.csv"), summary.as_bytes())?;
        outputs.push("summary.csv".into());

        let mut meta =
            RunMetadata::new("evaluate", resolved.seed, resolved.workers, &model, &backend.id());
        meta.preprocessing = resolved.preprocessing.clone();
        meta.mask_config = Some(mask_config);
        meta.eval_config = Some(eval_config);
        record_common_decisions(&mut meta);
        meta.decisions.insert("threshold_rule".into(), match threshold_flag {
            Some(_) => "fixed by flag".into(),
            None => "max accuracy on unmodified pairs, midpoint of best interval".into(),
        });
        meta.decisions.insert("curve_pairs".into(), "matching pairs only".into());
        meta.decisions
            .insert("modification".into(), "both images of a pair, each by its own map".into());
        meta.decisions
            .insert("degenerate_pairs".into(), "zero-norm embedding counts as non-match".into());
        meta.decisions.insert("manifest".into(), manifest_path.display().to_string());
        outputs.push("run.json".into());
        meta.outputs = outputs;
        meta.write(&resolved.out.join("run.json"))
    })
}

pub fn cmd_sanity_check(args: SanityArgs) -> Result<()> {
    let (resolved, file) = args.common.resolve("corrrise-out")?;
    let model = resolved.require_model()?;
    let manifest_path = file
        .resolve_path(args.manifest.clone(), "manifest")
        .ok_or_else(|| Error::Config("--manifest is required".into()))?;

    let backend = build_backend(&model, resolved.preprocessing.clone())?;
    let randomized = backend.randomize_parameters(resolved.seed)?;
    let manifest = io::load_manifest(&manifest_path)?;
    let pairs = load_pair_images(&manifest, backend.as_ref(), resolved.crop)?;
    if pairs.is_empty() {
        return Err(Error::Data(format!("{}: manifest has no pairs", manifest_path.display())));
    }

    ensure_out_dir(&resolved.out)?;
    let pool = resolved.thread_pool()?;
    pool.install(|| -> Result<()> {
        let mut correlations = Vec::new();
        let mut outputs = Vec::new();
        for (i, pair) in pairs.iter().enumerate() {
            let mask_config = resolved.mask_config(pair.a.height(), pair.a.width());
            let trained = explain_pair(&ExplainRequest {
                image_a: &pair.a,
                image_b: &pair.b,
                backend: backend.as_ref(),
                mask_config: mask_config.clone(),
            })?;
            let fake = explain_pair(&ExplainRequest {
                image_a: &pair.a,
                image_b: &pair.b,
                backend: randomized.as_ref(),
                mask_config,
            })?;
            correlations.push(pearson_correlation(trained.s_a.data(), fake.s_a.data())?);
            correlations.push(pearson_correlation(trained.s_b.data(), fake.s_b.data())?);

            for (suffix, map, img) in [
                ("trained_a", &trained.s_a, &pair.a),
                ("trained_b", &trained.s_b, &pair.b),
                ("randomized_a", &fake.s_a, &pair.a),
                ("randomized_b", &fake.s_b, &pair.b),
            ] {
                let salm = format!("pair{i:03}_{suffix}.salm");
                let png = format!("pair{i:03}_{suffix}.png");
                io::save_saliency(map, &resolved.out.join(&salm))?;
                io::render_heatmap(img, map, io::HeatmapMode::Signed, &resolved.out.join(&png))?;
                outputs.push(salm);
                outputs.push(png);
            }
        }
        let mean_abs =
            correlations.iter().map(|c| c.abs()).sum::<f64>() / correlations.len() as f64;

        let mut meta = RunMetadata::new(
            "sanity-check",
            resolved.seed,
            resolved.workers,
            &model,
            &backend.id(),
        );
        meta.preprocessing = resolved.preprocessing.clone();
        record_common_decisions(&mut meta);
        meta.decisions
            .insert("randomization".into(), "all parameters re-drawn from one seed".into());
        meta.decisions.insert("manifest".into(), manifest_path.display().to_string());
        meta.sanity = Some(SanityMetadata {
            pairs: pairs.len(),
            randomization_seed: resolved.seed,
            mean_abs_correlation: mean_abs,
            per_pair_correlation: correlations,
        });
        outputs.push("run.json".into());
        meta.outputs = outputs;
        meta.write(&resolved.out.join("run.json"))?;
        println!("sanity-check: mean |correlation| = {mean_abs:.4} over {} pairs", pairs.len());
        Ok(())
    })
}

pub fn cmd_genmasks(args: GenmasksArgs) -> Result<()> {
    let (resolved, file) = args.common.resolve("corrrise-out")?;
    let size: Vec<usize> = if args.size.is_empty() {
        match file.get("size") {
            Some(raw) => raw
                .split_whitespace()
                .map(|p| {
                    p.parse::<usize>()
                        .map_err(|_| Error::Config(format!("size: cannot parse `{p}`")))
                })
                .collect::<Result<_>>()?,
            None => return Err(Error::Config("--size H W is required".into())),
        }
    } else {
        args.size.clone()
    };
    if size.len() != 2 {
        return Err(Error::Config(format!("--size needs exactly 2 values, got {}", size.len())));
    }
    let (height, width) = (size[0], size[1]);

    let mut mask_config = resolved.mask_config(height, width);
    if let Some(num) = file.resolve(args.num, "num")? {
        mask_config.num_masks = num;
    } else if args.common.iterations.is_none() && file.get("iterations").is_none() {
        mask_config.num_masks = 16; // a debug dump, not a full run
    }

    let stack = generate_stack(&mask_config, height, width)?;
    ensure_out_dir(&resolved.out)?;
    let mut outputs = Vec::new();
    for (i, mask) in stack.iter().enumerate() {
        let name = format!("mask_{i:03}.png");
        io::mask_to_png(mask, &resolved.out.join(&name))?;
        outputs.push(name);
    }

    let mut meta = RunMetadata::new("genmasks", resolved.seed, resolved.workers, "-", "-");
    meta.mask_config = Some(mask_config);
    record_common_decisions(&mut meta);
    outputs.push("run.json".into());
    meta.outputs = outputs;
    meta.write(&resolved.out.join("run.json"))
}

impl Resolved {
    fn require_model(&self) -> Result<String> {
        self.model
            .clone()
            .ok_or_else(|| Error::Config("--model is required".into()))
    }
}

impl std::str::FromStr for MethodArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "corrrise" => Ok(MethodArg::Corrrise),
            "random" => Ok(MethodArg::Random),
            "center" => Ok(MethodArg::Center),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

impl std::str::FromStr for RankingArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "signed" => Ok(RankingArg::Signed),
            "positive-only" => Ok(RankingArg::PositiveOnly),
            other => Err(format!("unknown ranking `{other}`")),
        }
    }
}
