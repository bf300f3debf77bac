// SPDX-License-Identifier: Apache-2.0

//! Run configuration: one flat TOML file holding every seed and hyperparameter.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tvopt_core::corpus::{CorpusConfig, GeneratorConfig};
use tvopt_core::models::{KernelConfig, LinearOptions, Penalty};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Linear,
    KernelLogistic,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Linear => "linear",
            ModelKind::KernelLogistic => "kernel-logistic",
        })
    }
}

/// `"auto"` or a fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauSetting {
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for TauSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(TauSetting::Auto);
        }
        match s.parse::<f64>() {
            Ok(t) if (0.0..=1.0).contains(&t) => Ok(TauSetting::Fixed(t)),
            _ => Err(format!(
                "tau must be `auto` or a number in [0, 1], got `{s}`"
            )),
        }
    }
}

impl Serialize for TauSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TauSetting::Auto => s.serialize_str("auto"),
            TauSetting::Fixed(t) => s.serialize_f64(*t),
        }
    }
}

impl<'de> Deserialize<'de> for TauSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(t) => t.to_string().parse().map_err(serde::de::Error::custom),
            Raw::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory of `.bench` netlists; empty selects the built-in generator.
    pub netlist_dir: String,
    pub circuits: usize,
    pub patterns_per_circuit: usize,
    pub exhaustive: bool,
    pub inputs_min: usize,
    pub inputs_max: usize,
    pub gates_min: usize,
    pub gates_max: usize,
    pub corpus_seed: u64,
    /// Dictionary exports are large; they can be skipped.
    pub write_dictionaries: bool,

    pub train_fraction: f64,
    /// Share of the training circuits held out for choosing tau.
    pub validation_fraction: f64,
    pub split_seed: u64,

    pub model: ModelKind,
    pub penalty: String,
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub landmark_cap: usize,
    pub model_seed: u64,
    pub tau: TauSetting,

    pub sweep_alphas: Vec<f64>,
    pub sweep_penalty: String,
    pub curve_fractions: Vec<f64>,
    pub curve_seed: u64,

    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let corpus = CorpusConfig::default();
        let kernel = KernelConfig::default();
        RunConfig {
            netlist_dir: String::new(),
            circuits: corpus.circuits,
            patterns_per_circuit: corpus.patterns_per_circuit,
            exhaustive: corpus.exhaustive,
            inputs_min: corpus.generator.inputs_min,
            inputs_max: corpus.generator.inputs_max,
            gates_min: corpus.generator.gates_min,
            gates_max: corpus.generator.gates_max,
            corpus_seed: corpus.seed,
            write_dictionaries: true,
            train_fraction: 0.7,
            validation_fraction: 0.25,
            split_seed: 11,
            model: ModelKind::KernelLogistic,
            penalty: "ridge".into(),
            alpha: 1e-4,
            gamma: kernel.gamma,
            lambda: kernel.lambda,
            learning_rate: kernel.learning_rate,
            iterations: kernel.max_iterations,
            landmark_cap: kernel.landmark_cap,
            model_seed: kernel.seed,
            tau: TauSetting::Auto,
            sweep_alphas: vec![1e-4, 1e-3, 1e-2, 1e-1],
            sweep_penalty: "lasso".into(),
            curve_fractions: vec![0.2, 0.4, 0.6, 2.0 / 3.0, 0.8, 1.0],
            curve_seed: 5,
            out_dir: "out".into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!(
                "train_fraction {} not in (0, 1)",
                self.train_fraction
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!(
                "validation_fraction {} not in [0, 1)",
                self.validation_fraction
            ));
        }
        if Penalty::parse(&self.penalty).is_none() {
            return bad(format!("unknown penalty `{}`", self.penalty));
        }
        if Penalty::parse(&self.sweep_penalty).is_none() {
            return bad(format!("unknown sweep_penalty `{}`", self.sweep_penalty));
        }
        if self.alpha < 0.0 || self.sweep_alphas.iter().any(|&a| a < 0.0) {
            return bad("alphas must be non-negative".into());
        }
        if self.curve_fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            return bad("curve_fractions must lie in (0, 1]".into());
        }
        Ok(())
    }

    pub fn corpus(&self) -> CorpusConfig {
        CorpusConfig {
            circuits: self.circuits,
            patterns_per_circuit: self.patterns_per_circuit,
            exhaustive: self.exhaustive,
            seed: self.corpus_seed,
            generator: GeneratorConfig {
                inputs_min: self.inputs_min,
                inputs_max: self.inputs_max,
                gates_min: self.gates_min,
                gates_max: self.gates_max,
            },
        }
    }

    pub fn kernel(&self) -> KernelConfig {
        KernelConfig {
            gamma: self.gamma,
            lambda: self.lambda,
            learning_rate: self.learning_rate,
            max_iterations: self.iterations,
            landmark_cap: self.landmark_cap,
            seed: self.model_seed,
        }
    }

    pub fn linear_options(&self) -> LinearOptions {
        LinearOptions {
            penalty: Penalty::parse(&self.penalty).unwrap_or_default(),
            fit_intercept: true,
        }
    }

    pub fn sweep_options(&self) -> LinearOptions {
        LinearOptions {
            penalty: Penalty::parse(&self.sweep_penalty).unwrap_or(Penalty::Lasso),
            fit_intercept: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrips() {
        let cfg = RunConfig::default();
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml(), cfg.to_toml());
    }

    #[test]
    fn fixed_tau_roundtrips() {
        let cfg = RunConfig {
            tau: TauSetting::Fixed(0.9),
            model: ModelKind::Linear,
            ..RunConfig::default()
        };
        let text = cfg.to_toml();
        assert!(text.contains("tau = 0.9"));
        assert!(text.contains("model = \"linear\""));
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg: RunConfig = toml::from_str("circuits = 3\ntau = \"auto\"\n").unwrap();
        assert_eq!(cfg.circuits, 3);
        assert_eq!(cfg.split_seed, RunConfig::default().split_seed);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
        assert!(toml::from_str::<RunConfig>("tau = \"sometimes\"").is_err());
        assert!(toml::from_str::<RunConfig>("tau = 1.5").is_err());
        let cfg = RunConfig {
            penalty: "l3".into(),
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
