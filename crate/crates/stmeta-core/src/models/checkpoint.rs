//! Parameter checkpoints: a versioned JSON map of named tensors.
//!
//! Entries keep the model's flat parameter order, so serializing the same
//! parameters twice yields byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::numerics::Tensor;

use super::{ModelError, StMetaConfig, StMetaModel};

pub const CHECKPOINT_FORMAT: &str = "stmeta-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

/// On-disk checkpoint: format header, model config, named tensors.
#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    format: String,
    version: u32,
    pub config: StMetaConfig,
    entries: Vec<Entry>,
}

/// Serializes a model's parameters (with its config) to `path`.
pub fn save_checkpoint(model: &StMetaModel, path: &Path) -> Result<(), ModelError> {
    let entries = model
        .params
        .named()
        .into_iter()
        .map(|(name, t)| Entry {
            name,
            shape: t.shape().to_vec(),
            values: t.values().to_vec(),
        })
        .collect();
    let file = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        entries,
    };
    let json = serde_json::to_string(&file).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    std::fs::write(path, json).map_err(|e| ModelError::Checkpoint(e.to_string()))
}

/// Reads a checkpoint file and verifies its header.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    let json = std::fs::read_to_string(path).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    let file: Checkpoint =
        serde_json::from_str(&json).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(ModelError::Checkpoint(format!(
            "unexpected format {:?}",
            file.format
        )));
    }
    if file.version != CHECKPOINT_VERSION {
        return Err(ModelError::Checkpoint(format!(
            "unsupported version {}",
            file.version
        )));
    }
    Ok(file)
}

impl Checkpoint {
    /// Restores the stored tensors into a model built from the same
    /// config; every name and shape must match.
    pub fn restore_into(&self, model: &mut StMetaModel) -> Result<(), ModelError> {
        let names: Vec<String> = model.params.named().into_iter().map(|(n, _)| n).collect();
        if names.len() != self.entries.len() {
            return Err(ModelError::Checkpoint(format!(
                "parameter count mismatch: model has {}, checkpoint has {}",
                names.len(),
                self.entries.len()
            )));
        }
        let mut restored = Vec::with_capacity(self.entries.len());
        for (name, entry) in names.iter().zip(&self.entries) {
            if name != &entry.name {
                return Err(ModelError::Checkpoint(format!(
                    "parameter name mismatch: expected {name}, found {}",
                    entry.name
                )));
            }
            restored.push(
                Tensor::from_vec(entry.shape.clone(), entry.values.clone())
                    .map_err(|e| ModelError::Checkpoint(format!("{name}: {e}")))?,
            );
        }
        for (slot, tensor) in model.params.flatten_mut().into_iter().zip(restored) {
            if slot.shape() != tensor.shape() {
                return Err(ModelError::Checkpoint(format!(
                    "shape mismatch: {:?} vs {:?}",
                    slot.shape(),
                    tensor.shape()
                )));
            }
            *slot = tensor;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AggKind, StUnitKind};
    use crate::timeseries::FactorSpec;

    fn tiny_model(seed: u64) -> StMetaModel {
        let cfg = StMetaConfig {
            st_unit: StUnitKind::Lstm,
            temporal_agg: AggKind::Gal,
            hidden_units: 3,
            heads: 2,
            cheb_order: 0,
            factors: FactorSpec::new(2, 1, 0).unwrap(),
            head_units: 3,
        };
        StMetaModel::new(cfg, &[], seed).unwrap()
    }

    #[test]
    fn checkpoint_round_trip_restores_parameters() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let source = tiny_model(1);
        save_checkpoint(&source, &path).unwrap();

        let mut target = tiny_model(2);
        assert_ne!(
            source.params.flatten()[0].values(),
            target.params.flatten()[0].values()
        );
        load_checkpoint(&path).unwrap().restore_into(&mut target).unwrap();
        for (a, b) in source.params.flatten().iter().zip(target.params.flatten()) {
            assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn checkpoint_bytes_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        let model = tiny_model(3);
        save_checkpoint(&model, &a).unwrap();
        save_checkpoint(&model, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn mismatched_structure_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_checkpoint(&tiny_model(1), &path).unwrap();
        let cfg = StMetaConfig {
            hidden_units: 5,
            ..tiny_model(1).config
        };
        let mut other = StMetaModel::new(cfg, &[], 4).unwrap();
        assert!(load_checkpoint(&path)
            .unwrap()
            .restore_into(&mut other)
            .is_err());
    }
}
