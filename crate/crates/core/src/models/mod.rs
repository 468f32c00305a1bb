//! Baseline classifiers, their evaluation metrics and hyperparameter search.

pub mod forest;
pub mod metrics;
pub mod mlp;
pub mod network;
pub mod search;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::Matrix;

pub use forest::{train_forest, ForestModel, ForestParams};
pub use metrics::{evaluate, Confusion, EvalReport, Rate};
pub use mlp::{train_mlp, EpochRecord, MlpModel, MlpParams};
pub use search::{cross_validate, kfold_indices, random_search, MlpSpace};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training data holds a single class")]
    SingleClassInput,
    #[error("empty input")]
    EmptyInput,
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("expected {expected} features, got {got}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error("loss became non-finite in epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("length mismatch: {predicted} predictions for {truth} labels")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("parameter grid is empty")]
    GridEmpty,
    #[error("search space is empty")]
    SpaceEmpty,
    #[error("cannot make {k} folds from {n} rows")]
    TooFewRows { k: usize, n: usize },
    #[error("model file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model file {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// A trained classifier as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Forest(ForestModel),
    Mlp(MlpModel),
}

impl TrainedModel {
    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::Forest(m) => m.n_features,
            TrainedModel::Mlp(m) => m.n_features(),
        }
    }

    pub fn predict(&self, m: &Matrix) -> Result<Vec<u8>, ModelError> {
        match self {
            TrainedModel::Forest(f) => f.predict(m),
            TrainedModel::Mlp(n) => n.predict(m),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let s = serde_json::to_string(self).map_err(|source| ModelError::Json {
            path: path.display().to_string(),
            source,
        })?;
        std::fs::write(path, s).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let s = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&s).map_err(|source| ModelError::Json {
            path: path.display().to_string(),
            source,
        })
    }
}
