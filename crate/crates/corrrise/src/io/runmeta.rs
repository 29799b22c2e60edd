//! Run metadata: every CLI invocation writes one JSON record holding all the
//! configuration needed to reproduce its outputs exactly. Wall-clock time
//! lives in its own field (`unix_time_secs`) so two records from identical
//! runs are comparable by stripping that single field.

use crate::embedder::Preprocessing;
use crate::maskgen::MaskGenConfig;
use crate::metrics::EvalConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub workers: usize,
    /// Model argument as given on the command line.
    pub model: String,
    /// Resolved backend identity (includes the model file digest for ONNX
    /// backends).
    pub backend_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preprocessing: Option<Preprocessing>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask_config: Option<MaskGenConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_config: Option<EvalConfig>,
    /// Resolved behavioral choices recorded for comparability (mask merge
    /// rule, ranking interpretation, randomization scope, ...).
    pub decisions: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explain: Option<ExplainMetadata>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sanity: Option<SanityMetadata>,
    /// Files this run wrote, relative to the output directory.
    pub outputs: Vec<String>,
    /// Wall-clock timestamp; the only volatile field.
    pub unix_time_secs: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplainMetadata {
    pub image_a: String,
    pub image_b: String,
    pub score_unperturbed: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// `match` / `nonmatch` when a threshold was supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decision: Option<String>,
    pub skipped_iterations_a: usize,
    pub skipped_iterations_b: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SanityMetadata {
    pub pairs: usize,
    pub randomization_seed: u64,
    pub mean_abs_correlation: f64,
    pub per_pair_correlation: Vec<f64>,
}

impl RunMetadata {
    pub fn new(command: &str, seed: u64, workers: usize, model: &str, backend_id: &str) -> Self {
        RunMetadata {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            workers,
            model: model.to_string(),
            backend_id: backend_id.to_string(),
            preprocessing: None,
            mask_config: None,
            eval_config: None,
            decisions: BTreeMap::new(),
            explain: None,
            sanity: None,
            outputs: Vec::new(),
            unix_time_secs: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn write(&self, path: &Path) -> crate::error::Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| crate::error::Error::Data(format!("metadata: {e}")))?;
        super::write_atomic(path, json.as_bytes())
    }
}

/// Remove the volatile timestamp field from a parsed metadata value, for
/// byte-level comparison of otherwise identical runs.
pub fn strip_timestamp(value: &mut serde_json::Value) {
    if let Some(obj) = value.as_object_mut() {
        obj.remove("unix_time_secs");
    }
}
