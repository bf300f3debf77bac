// SPDX-License-Identifier: Apache-2.0

//! Learned test termination for stuck-at fault diagnosis.
//!
//! The pipeline: parse or generate combinational netlists ([`netlist`]),
//! build a fault dictionary ([`faultsim`]), replay an injected fault's fail
//! log into per-pattern candidate sets and labels ([`diagnosis`]), extract
//! the five-feature dataset ([`dataset`]), fit ridge/LASSO or RBF kernel
//! logistic predictors ([`models`]) and score stop policies by diagnosis
//! accuracy and test-volume reduction ([`evaluation`]).

pub mod corpus;
pub mod dataset;
pub mod diagnosis;
pub mod evaluation;
pub mod faultsim;
pub mod models;
pub mod netlist;

pub use dataset::{Dataset, FeatureRow, Standardization};
pub use diagnosis::DiagnosisTrace;
pub use evaluation::{TerminationPolicy, TerminationReport};
pub use faultsim::{Fault, FaultDictionary};
pub use models::{KernelLogisticModel, LinearModel, Model, TrainedModel};
pub use netlist::{Circuit, Pattern, Response};
