// SPDX-License-Identifier: Apache-2.0

//! Termination predictors: penalized linear regression and RBF kernel
//! logistic classification, plus the versioned model file.

mod file;
pub mod kernel;
pub mod linear;

use thiserror::Error;

pub use file::{read_model, write_model, TrainedModel, MODEL_FILE_MAGIC};
pub use kernel::{
    fit_kernel_logistic, fit_kernel_logistic_with_history, logistic_cost_grad, predict_prob,
    rbf_map, rbf_matrix, sigmoid, FeatureMatrix, KernelConfig, KernelLogisticModel,
    TrainingHistory,
};
pub use linear::{
    beta_norm, fit_penalized_linear, predict_linear, LinearModel, LinearOptions, Penalty,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("classification labels must be 0 or 1")]
    NonBinaryLabels,
    #[error("model file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Either fitted predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    KernelLogistic(KernelLogisticModel),
}

impl Model {
    /// Raw model output: a regression value for the linear model, a
    /// probability for the classifier.
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            Model::Linear(m) => predict_linear(m, x),
            Model::KernelLogistic(m) => predict_prob(m, x),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Linear(_) => "linear",
            Model::KernelLogistic(_) => "kernel-logistic",
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Model::Linear(m) => format!("linear({} alpha={})", m.penalty.name(), m.alpha),
            Model::KernelLogistic(m) => format!(
                "kernel-logistic(gamma={} lambda={} landmarks={})",
                m.config.gamma,
                m.config.lambda,
                m.landmarks.len()
            ),
        }
    }
}
