//! Lexical and non-lexical featurization and an L2-regularized logistic
//! regression trained by deterministic full-batch gradient descent.

mod eval;
mod features;
mod model;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use eval::{
    binomial_std_error, cross_validate, evaluate, featurize_for, fit_units, fold_std_error,
    EvalReport, StdErrorKind,
};
pub use features::{
    build_vocabulary, vectorize, vectorize_all, FeatureSet, FeatureSpec, FeatureVector, Vocabulary,
};
pub use model::{
    fit, sigmoid, train, Design, Objective, Predictor, Standardizer, TrainConfig,
    TrainDiagnostics, TrainedModel,
};

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("objective became non-finite; check lambda and the input features")]
    NonFinite,
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("model file: {0}")]
    ModelFile(String),
}

const MODEL_FORMAT: &str = "talkprofiler-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize)]
struct ModelFileOut<'a> {
    format: &'a str,
    version: u32,
    sha256: String,
    model: &'a serde_json::value::RawValue,
}

#[derive(Deserialize)]
struct ModelFileIn<'a> {
    format: String,
    version: u32,
    sha256: String,
    #[serde(borrow)]
    model: &'a serde_json::value::RawValue,
}

/// Serializes a model as JSON with a SHA-256 of the embedded model body.
pub fn model_to_json(model: &TrainedModel) -> String {
    let body = serde_json::to_string(model).expect("model serializes");
    let raw = serde_json::value::RawValue::from_string(body).expect("valid json");
    let out = ModelFileOut {
        format: MODEL_FORMAT,
        version: MODEL_VERSION,
        sha256: hex::encode(Sha256::digest(raw.get().as_bytes())),
        model: &raw,
    };
    serde_json::to_string(&out).expect("model file serializes")
}

pub fn model_from_json(text: &str) -> Result<TrainedModel, ClassifierError> {
    let file: ModelFileIn<'_> =
        serde_json::from_str(text).map_err(|e| ClassifierError::ModelFile(e.to_string()))?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(ClassifierError::ModelFile(format!(
            "unsupported format {} v{}",
            file.format, file.version
        )));
    }
    let digest = hex::encode(Sha256::digest(file.model.get().as_bytes()));
    if digest != file.sha256 {
        return Err(ClassifierError::ModelFile("content hash mismatch".into()));
    }
    serde_json::from_str(file.model.get()).map_err(|e| ClassifierError::ModelFile(e.to_string()))
}

pub fn save_model(model: &TrainedModel, path: &Path) -> std::io::Result<()> {
    fs::write(path, model_to_json(model))
}

pub fn load_model(path: &Path) -> Result<TrainedModel, ClassifierError> {
    let text = fs::read_to_string(path).map_err(|e| ClassifierError::ModelFile(e.to_string()))?;
    model_from_json(&text)
}
