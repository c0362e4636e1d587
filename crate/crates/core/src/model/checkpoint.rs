use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::PhotonicModel;
use super::spec::ModelSpec;
use super::train::EpochRecord;
use crate::data::{Pca, Standardizer};
use crate::error::{Error, Result};
use crate::tensor::{BatchNormState, ParamStore};

pub const CHECKPOINT_FORMAT: &str = "photonas-checkpoint/v1";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub epochs: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub best_val_acc: Option<f64>,
    pub final_record: Option<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format: String,
    pub spec: ModelSpec,
    pub params: ParamStore,
    pub batchnorm: Vec<BatchNormState>,
    pub standardizer: Standardizer,
    pub pca: Option<Pca>,
    pub metadata: TrainingMetadata,
}

impl ModelCheckpoint {
    pub fn capture(model: &PhotonicModel, metadata: TrainingMetadata) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            spec: model.spec().clone(),
            params: model.params().clone(),
            batchnorm: model.batchnorm_states().to_vec(),
            standardizer: model.standardizer.clone(),
            pca: model.pca.clone(),
            metadata,
        }
    }

    /// Rebuilds the model and checks every tensor against the spec.
    pub fn restore(&self) -> Result<PhotonicModel> {
        let mut model = PhotonicModel::build(self.spec.clone(), 0)?;
        let fresh = model.params();
        let same = fresh.len() == self.params.len()
            && fresh
                .iter()
                .zip(self.params.iter())
                .all(|((a, x), (b, y))| a == b && x.shape() == y.shape());
        if !same || model.batchnorm_states().len() != self.batchnorm.len() {
            return Err(Error::Contract(
                "checkpoint parameters do not match its model spec".into(),
            ));
        }
        let mut params = self.params.clone();
        params.ensure_grad_buffers();
        model.restore(params, self.batchnorm.clone());
        model.standardizer = self.standardizer.clone();
        model.pca = self.pca.clone();
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Contract(format!(
                "unsupported checkpoint format `{}`",
                ck.format
            )));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
