use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HyperParams, TrainHistory, TrainingError};
use crate::gnn::{GnnStack, ModelConfig};
use crate::tensor::TensorArchive;

pub const CHECKPOINT_VERSION: u32 = 1;
const FORMAT: &str = "socnav-checkpoint";

/// Trained parameters plus everything needed to rebuild and audit the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: GnnStack,
    pub hyperparams: HyperParams,
    /// `None` for models that were never trained.
    pub history: Option<TrainHistory>,
    /// SHA-256 of the split manifest the model was trained with.
    pub manifest_sha256: String,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    format: String,
    checkpoint_version: u32,
    model: ModelConfig,
    hyperparams: HyperParams,
    history: Option<TrainHistory>,
    manifest_sha256: String,
}

impl Checkpoint {
    pub fn untrained(model: GnnStack, hyperparams: HyperParams) -> Self {
        Self {
            model,
            hyperparams,
            history: None,
            manifest_sha256: String::new(),
        }
    }

    pub fn to_archive(&self) -> TensorArchive {
        let meta = Meta {
            format: FORMAT.into(),
            checkpoint_version: CHECKPOINT_VERSION,
            model: self.model.config.clone(),
            hyperparams: self.hyperparams.clone(),
            history: self.history.clone(),
            manifest_sha256: self.manifest_sha256.clone(),
        };
        TensorArchive {
            tensors: self
                .model
                .params
                .iter()
                .map(|(_, name, t)| (name.to_string(), t.clone()))
                .collect(),
            meta: serde_json::to_value(meta).expect("checkpoint metadata serializes"),
        }
    }

    pub fn from_archive(archive: TensorArchive) -> Result<Self, TrainingError> {
        let version = archive
            .meta
            .get("checkpoint_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| TrainingError::Checkpoint("missing checkpoint_version".into()))?;
        if version != CHECKPOINT_VERSION as u64 {
            return Err(TrainingError::VersionMismatch {
                found: version.min(u32::MAX as u64) as u32,
                expected: CHECKPOINT_VERSION,
            });
        }
        let meta: Meta = serde_json::from_value(archive.meta)
            .map_err(|e| TrainingError::Checkpoint(format!("metadata: {e}")))?;
        if meta.format != FORMAT {
            return Err(TrainingError::Checkpoint(format!("unexpected format `{}`", meta.format)));
        }
        let mut model = GnnStack::new(meta.model, 0)?;
        model
            .params
            .load(archive.tensors.iter().map(|(n, t)| (n.as_str(), t)))
            .map_err(|e| TrainingError::Checkpoint(e.to_string()))?;
        Ok(Self {
            model,
            hyperparams: meta.hyperparams,
            history: meta.history,
            manifest_sha256: meta.manifest_sha256,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_archive().to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrainingError> {
        Self::from_archive(TensorArchive::from_bytes(bytes)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrainingError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrainingError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
