//! Shared fixtures for the integration suites: synthetic datasets with known
//! ground truth, a hand-built ONNX model, and independent statistical
//! oracles.

#![allow(dead_code)]

use corrrise::metrics::LoadedPair;
use corrrise::rng::SplitMix64;
use corrrise::types::{ImageTensor, Mask};
use prost::Message;
use std::path::Path;
use tract_onnx::pb;

pub const SUITE_H: usize = 112;
pub const SUITE_W: usize = 112;

/// Uniform-noise image in [0.15, 0.95), used for identical-pair runs.
pub fn noise_image(h: usize, w: usize, seed: u64) -> ImageTensor {
    let mut rng = SplitMix64::new(seed);
    ImageTensor::new(h, w, 1, (0..h * w).map(|_| (0.15 + 0.8 * rng.next_f64()) as f32).collect())
        .unwrap()
}

/// Identity = 3 distinct bright cells of the 4x4 cell grid over a 112x112
/// image, with the central 2x2 block excluded so identities never sit at the
/// image center.
pub fn identity_cells(id_seed: u64) -> Vec<usize> {
    let eligible: Vec<usize> = (0..16).filter(|c| !matches!(c, 5 | 6 | 9 | 10)).collect();
    let mut rng = SplitMix64::new(id_seed);
    let mut cells = Vec::new();
    while cells.len() < 3 {
        let c = eligible[rng.next_below(eligible.len() as u64) as usize];
        if !cells.contains(&c) {
            cells.push(c);
        }
    }
    cells
}

/// Render an identity onto a dim background with per-pixel noise.
pub fn identity_image(cells: &[usize], noise_seed: u64) -> ImageTensor {
    let mut rng = SplitMix64::new(noise_seed);
    let mut data = vec![0.0f32; SUITE_H * SUITE_W];
    for r in 0..SUITE_H {
        for c in 0..SUITE_W {
            let cell = (r / 28) * 4 + (c / 28);
            let base = if cells.contains(&cell) { 0.8 } else { 0.12 };
            data[r * SUITE_W + c] = base + 0.05 * rng.next_f64() as f32;
        }
    }
    ImageTensor::new(SUITE_H, SUITE_W, 1, data).unwrap()
}

/// The evaluation suite: 8 matching pairs (same identity, fresh pixel noise)
/// and 4 non-matching pairs whose identities share exactly one cell, so
/// impostor scores are well above zero and the frozen threshold is
/// demanding.
pub fn toy_eval_suite() -> Vec<LoadedPair> {
    let mut pairs = Vec::new();
    for i in 0..8u64 {
        let cells = identity_cells(i);
        pairs.push(LoadedPair {
            id: format!("m{i}"),
            a: identity_image(&cells, 1000 + i),
            b: identity_image(&cells, 2000 + i),
            matching: true,
        });
    }
    for i in 0..4u64 {
        let cells_a = identity_cells(100 + i);
        let mut salt = 0;
        let cells_b = loop {
            let cand = identity_cells(200 + i + salt * 1000);
            if cand.iter().filter(|c| cells_a.contains(c)).count() == 1 {
                break cand;
            }
            salt += 1;
        };
        pairs.push(LoadedPair {
            id: format!("n{i}"),
            a: identity_image(&cells_a, 3000 + i),
            b: identity_image(&cells_b, 4000 + i),
            matching: false,
        });
    }
    pairs
}

/// Naive per-pixel Pearson oracle: straightforward double loop, mean-center
/// both series, divide by the product of standard deviations. Written
/// independently of the production correlation pass.
pub fn naive_pixelwise_pearson(masks: &[Mask], scores: &[f64]) -> Vec<f64> {
    assert_eq!(masks.len(), scores.len());
    let n = scores.len();
    let (h, w) = (masks[0].height(), masks[0].width());
    let mut out = vec![0.0f64; h * w];
    for (px, out_px) in out.iter_mut().enumerate() {
        let series: Vec<f64> = masks.iter().map(|m| m.data()[px] as f64).collect();
        let mean_x = series.iter().sum::<f64>() / n as f64;
        let mean_y = scores.iter().sum::<f64>() / n as f64;
        let mut cov = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for k in 0..n {
            cov += (series[k] - mean_x) * (scores[k] - mean_y);
            vx += (series[k] - mean_x) * (series[k] - mean_x);
            vy += (scores[k] - mean_y) * (scores[k] - mean_y);
        }
        *out_px = if vx == 0.0 || vy == 0.0 { 0.0 } else { cov / (vx.sqrt() * vy.sqrt()) };
    }
    out
}

/// Independent cosine oracle over f64 slices.
pub fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Fraction of the top-5% ranked pixels that fall in the left half.
pub fn top5_left_precision(map: &corrrise::types::SaliencyMap) -> f64 {
    let total = map.data().len();
    let k = total / 20;
    let ranked = corrrise::metrics::rank_pixels(map, corrrise::metrics::RankingSource::Signed);
    let in_left = ranked[..k].iter().filter(|&&px| (px % map.width()) < map.width() / 2).count();
    in_left as f64 / k as f64
}

fn value_info(name: &str, dims: &[i64]) -> pb::ValueInfoProto {
    pb::ValueInfoProto {
        name: name.to_string(),
        r#type: Some(pb::TypeProto {
            value: Some(pb::type_proto::Value::TensorType(pb::type_proto::Tensor {
                elem_type: pb::tensor_proto::DataType::Float as i32,
                shape: Some(pb::TensorShapeProto {
                    dim: dims
                        .iter()
                        .map(|&d| pb::tensor_shape_proto::Dimension {
                            value: Some(pb::tensor_shape_proto::dimension::Value::DimValue(d)),
                            ..Default::default()
                        })
                        .collect(),
                }),
            })),
            ..Default::default()
        }),
        ..Default::default()
    }
}

/// Serialized ONNX model: input `[1,1,8,8]` -> Flatten -> MatMul with a
/// seeded `[64,4]` weight initializer -> output `[1,4]`.
pub fn tiny_onnx_model_bytes(weights_seed: u64) -> Vec<u8> {
    let mut rng = SplitMix64::new(weights_seed);
    let weights: Vec<f32> = (0..64 * 4).map(|_| (rng.next_f64() * 2.0 - 1.0) as f32).collect();
    let initializer = pb::TensorProto {
        dims: vec![64, 4],
        data_type: pb::tensor_proto::DataType::Float as i32,
        float_data: weights,
        name: "weights".to_string(),
        ..Default::default()
    };
    let flatten = pb::NodeProto {
        input: vec!["input".to_string()],
        output: vec!["flat".to_string()],
        name: "flatten".to_string(),
        op_type: "Flatten".to_string(),
        attribute: vec![pb::AttributeProto {
            name: "axis".to_string(),
            i: 1,
            r#type: pb::attribute_proto::AttributeType::Int as i32,
            ..Default::default()
        }],
        ..Default::default()
    };
    let matmul = pb::NodeProto {
        input: vec!["flat".to_string(), "weights".to_string()],
        output: vec!["output".to_string()],
        name: "matmul".to_string(),
        op_type: "MatMul".to_string(),
        ..Default::default()
    };
    let graph = pb::GraphProto {
        node: vec![flatten, matmul],
        name: "tiny".to_string(),
        initializer: vec![initializer],
        input: vec![value_info("input", &[1, 1, 8, 8])],
        output: vec![value_info("output", &[1, 4])],
        ..Default::default()
    };
    let model = pb::ModelProto {
        ir_version: 8,
        opset_import: vec![pb::OperatorSetIdProto { domain: String::new(), version: 13 }],
        producer_name: "tiny-test-model".to_string(),
        graph: Some(graph),
        ..Default::default()
    };
    model.encode_to_vec()
}

/// Write the tiny model into `dir` and return its path.
pub fn write_tiny_onnx_model(dir: &Path, weights_seed: u64) -> std::path::PathBuf {
    let path = dir.join("tiny.onnx");
    std::fs::write(&path, tiny_onnx_model_bytes(weights_seed)).unwrap();
    path
}

/// Write an image as an 8-bit grayscale PNG.
pub fn write_gray_png(img: &ImageTensor, path: &Path) {
    corrrise::io::image_to_png(img, path).unwrap();
}
