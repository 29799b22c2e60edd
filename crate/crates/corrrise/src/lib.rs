//! Black-box saliency explanations for pairwise face verification.
//!
//! Given any model that maps a face image to an embedding vector, this crate
//! explains why the model considers two faces matching or non-matching: it
//! perturbs each image with a stack of seeded random masks, scores the masked
//! image against its unmasked counterpart, and correlates per-pixel mask
//! visibility with the similarity scores (the CorrRISE algorithm). The result
//! is a signed saliency map per image — positive values are similarity
//! evidence, negative values dissimilarity evidence.
//!
//! The crate also ships the deletion/insertion evaluation harness for scoring
//! any saliency method against baselines, a parameter-randomization sanity
//! check, an ONNX inference backend, analytically transparent toy backends,
//! and the `corrrise` CLI over all of it.

pub mod cli;
pub mod embedder;
pub mod error;
pub mod explain;
pub mod io;
pub mod maskgen;
pub mod metrics;
pub mod rng;
pub mod stats;
pub mod types;

pub use error::{Error, Result};
