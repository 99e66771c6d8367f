use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Task;
use crate::error::{Error, Result};

use super::{ModelParams, OptimizerState};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub task: Task,
    pub fold: usize,
    /// Completed epochs when this snapshot was taken; 0 is the initialisation.
    pub epoch: usize,
    pub validation_score: f64,
}

/// Best-epoch snapshot of one fold: parameters, optimizer state and where it came from.
///
/// Serialised as compact JSON. Floats are written in shortest round-trip form
/// and parsed exactly, so save → load → save reproduces the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub labels: Vec<String>,
    pub none_label: Option<usize>,
    pub params: ModelParams,
    pub optimizer: OptimizerState,
    pub provenance: Provenance,
}

impl ModelCheckpoint {
    pub fn new(
        labels: Vec<String>,
        none_label: Option<usize>,
        params: ModelParams,
        optimizer: OptimizerState,
        provenance: Provenance,
    ) -> Self {
        ModelCheckpoint {
            format_version: FORMAT_VERSION,
            labels,
            none_label,
            params,
            optimizer,
            provenance,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if !self.params.is_finite() {
            return Err(Error::Validation("checkpoint parameters contain non-finite values".into()));
        }
        Ok(serde_json::to_vec(self)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ckpt: ModelCheckpoint = serde_json::from_slice(bytes)?;
        if ckpt.format_version != FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported checkpoint format version {}",
                ckpt.format_version
            )));
        }
        let head = &ckpt.params.head;
        let shapes_ok = head.weights.len() == head.dim_in * head.dim_out
            && head.bias.len() == head.dim_out
            && head.dim_out == ckpt.labels.len()
            && ckpt.params.trunk.as_ref().is_none_or(|t| {
                t.layer.weights.len() == t.layer.dim_in * t.layer.dim_out
                    && t.layer.bias.len() == t.layer.dim_out
                    && t.layer.dim_out == head.dim_in
            });
        if !shapes_ok {
            return Err(Error::Validation("checkpoint tensor shapes are inconsistent".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Mode;
    use crate::model::{init_model, AdamWConfig};
    use proptest::prelude::*;

    fn sample(seed: u64) -> ModelCheckpoint {
        let params = init_model(6, Some(4), 3, Mode::Multiclass, seed).unwrap();
        let mut optimizer = OptimizerState::new(&params, AdamWConfig::default());
        optimizer.step = 17;
        optimizer.m[0][1] = -1.234_567_890_123e-7;
        optimizer.v[2][0] = 3.0e-300;
        ModelCheckpoint::new(
            vec!["opinion".into(), "reporting".into(), "satire".into()],
            None,
            params,
            optimizer,
            Provenance {
                task: Task::T1,
                fold: 2,
                epoch: 9,
                validation_score: 0.812_345_678_901_234_5,
            },
        )
    }

    #[test]
    fn file_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("T1/2/best.ckpt");
        let ckpt = sample(5);
        ckpt.save(&path).unwrap();
        let first = fs::read(&path).unwrap();
        let loaded = ModelCheckpoint::load(&path).unwrap();
        assert_eq!(loaded, ckpt);
        let again = dir.path().join("again.ckpt");
        loaded.save(&again).unwrap();
        assert_eq!(first, fs::read(&again).unwrap());
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        let mut ckpt = sample(1);
        ckpt.labels.pop();
        let bytes = serde_json::to_vec(&ckpt).unwrap();
        assert!(ModelCheckpoint::from_bytes(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn bytes_round_trip(seed: u64, scale in -300i32..300, mantissa in -1.0f64..1.0) {
            let mut ckpt = sample(seed);
            ckpt.params.head.bias[0] = mantissa * 10f64.powi(scale);
            let bytes = ckpt.to_bytes().unwrap();
            let back = ModelCheckpoint::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes().unwrap(), bytes);
            prop_assert_eq!(back.params.head.bias[0].to_bits(), ckpt.params.head.bias[0].to_bits());
        }
    }
}
