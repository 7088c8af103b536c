//! Versioned pipeline checkpoints.
//!
//! A checkpoint is a JSON container holding the config fingerprint, the
//! fitted scaler, the model kind, and the parameters (matrices stored as
//! shape plus row-major data). Loading a file whose version differs from
//! [`CHECKPOINT_VERSION`] fails loudly instead of guessing.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::pipeline::TrainedPipeline;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    pipeline: TrainedPipeline,
}

/// Write `pipeline` to `path` as deterministic pretty-printed JSON: the same
/// pipeline always produces the same bytes.
pub fn save_checkpoint(pipeline: &TrainedPipeline, path: &Path) -> Result<()> {
    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION,
        pipeline: pipeline.clone(),
    };
    let json = serde_json::to_string_pretty(&checkpoint)?;
    std::fs::write(path, json).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Load and version-check a checkpoint.
pub fn load_checkpoint(path: &Path) -> Result<TrainedPipeline> {
    let raw = std::fs::read_to_string(path).map_err(|source| Error::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&raw)?;
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::MalformedCheckpoint("missing version field".into()))?;
    if version != u64::from(CHECKPOINT_VERSION) {
        return Err(Error::CheckpointVersion {
            found: version as u32,
            expected: CHECKPOINT_VERSION,
        });
    }
    let checkpoint: Checkpoint = serde_json::from_value(value)?;
    Ok(checkpoint.pipeline)
}
