//! Self-describing model container: configuration, filter bank and SVM.

use std::path::Path;

use csnet_core::classifier::SvmModel;
use csnet_core::{BlockSpec, FeatureExtractor, FilterBank};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const MODEL_FORMAT: &str = "csnet-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a model file: {0}")]
    Format(String),
    #[error("unsupported model version {found} (this build reads version {expected})")]
    Version { found: u64, expected: u32 },
    #[error("inconsistent model: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub config: ExperimentConfig,
    pub bank: FilterBank,
    pub blocks: BlockSpec,
    pub svm: SvmModel,
}

impl ModelFile {
    pub fn new(config: ExperimentConfig, bank: FilterBank, blocks: BlockSpec, svm: SvmModel) -> Self {
        Self { format: MODEL_FORMAT.to_string(), version: MODEL_VERSION, config, bank, blocks, svm }
    }

    pub fn extractor(&self) -> Result<FeatureExtractor, ModelError> {
        FeatureExtractor::new(self.bank.clone(), self.blocks).map_err(|e| ModelError::Inconsistent(e.to_string()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(self).expect("model serializes");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let value: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| ModelError::Format(e.to_string()))?;
        match value.get("format").and_then(|v| v.as_str()) {
            Some(MODEL_FORMAT) => {}
            other => return Err(ModelError::Format(format!("format tag {other:?}"))),
        }
        let version = value.get("version").and_then(|v| v.as_u64()).ok_or_else(|| ModelError::Format("missing version".into()))?;
        if version != u64::from(MODEL_VERSION) {
            return Err(ModelError::Version { found: version, expected: MODEL_VERSION });
        }
        let model: ModelFile = serde_json::from_value(value).map_err(|e| ModelError::Format(e.to_string()))?;
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<(), ModelError> {
        let inconsistent = |m: String| Err(ModelError::Inconsistent(m));
        let extractor = self.extractor()?;
        let dim = extractor.feature_dim(28, 28);
        if self.svm.weights.len() != self.svm.classes.len() || self.svm.biases.len() != self.svm.classes.len() {
            return inconsistent("SVM class, weight and bias counts differ".into());
        }
        if self.svm.weights.iter().any(|w| w.len() != dim) {
            return inconsistent(format!("SVM weights do not match the {dim}-dimensional feature"));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| ModelError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path).map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
        Self::from_bytes(&bytes)
    }
}
