// SPDX-License-Identifier: Apache-2.0

//! Pipeline driver behind the `tvopt` binary.

pub mod commands;
pub mod config;

pub use commands::OutputDir;
pub use config::{ModelKind, RunConfig, TauSetting};
