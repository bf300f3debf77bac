// SPDX-License-Identifier: Apache-2.0

//! Text model file.
//!
//! ```text
//! tvopt-model 1
//! kind linear | kernel-logistic
//! <hyperparameters, one `key value` per line>
//! mean <5 values>
//! std <5 values>
//! constant <5 flags 0|1>
//! tau <value>
//! train_circuits <count> <id>...
//! linear:          intercept <v> / beta <count> <values>
//! kernel-logistic: theta <count> <values> / landmarks <count> <dim>, then one row per line
//! end
//! ```
//!
//! Linear hyperparameters: `penalty`, `alpha`, `fit_intercept`, `rank_deficient`.
//! Kernel hyperparameters: `gamma`, `lambda`, `learning_rate`,
//! `max_iterations`, `landmark_cap`, `seed`.
//! Floats use the shortest representation that parses back to the same bits.

use std::io::{BufRead, Write};

use super::kernel::{KernelConfig, KernelLogisticModel};
use super::linear::{LinearModel, Penalty};
use super::{Model, ModelError};
use crate::dataset::{Standardization, NUM_FEATURES};

pub const MODEL_FILE_MAGIC: &str = "tvopt-model 1";

/// A fitted model with everything needed to score new traces.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: Model,
    pub standardization: Standardization,
    pub tau: f64,
    pub train_circuits: Vec<String>,
}

fn floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_model<W: Write>(m: &TrainedModel, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MODEL_FILE_MAGIC}")?;
    writeln!(out, "kind {}", m.model.kind())?;
    match &m.model {
        Model::Linear(l) => {
            writeln!(out, "penalty {}", l.penalty.name())?;
            writeln!(out, "alpha {:?}", l.alpha)?;
            writeln!(out, "fit_intercept {}", l.fit_intercept)?;
            writeln!(out, "rank_deficient {}", l.rank_deficient)?;
        }
        Model::KernelLogistic(k) => {
            let c = &k.config;
            writeln!(out, "gamma {:?}", c.gamma)?;
            writeln!(out, "lambda {:?}", c.lambda)?;
            writeln!(out, "learning_rate {:?}", c.learning_rate)?;
            writeln!(out, "max_iterations {}", c.max_iterations)?;
            writeln!(out, "landmark_cap {}", c.landmark_cap)?;
            writeln!(out, "seed {}", c.seed)?;
        }
    }
    let s = &m.standardization;
    writeln!(out, "mean {}", floats(&s.mean))?;
    writeln!(out, "std {}", floats(&s.std))?;
    let flags: Vec<&str> = s
        .constant
        .iter()
        .map(|&c| if c { "1" } else { "0" })
        .collect();
    writeln!(out, "constant {}", flags.join(" "))?;
    writeln!(out, "tau {:?}", m.tau)?;
    write!(out, "train_circuits {}", m.train_circuits.len())?;
    for id in &m.train_circuits {
        write!(out, " {id}")?;
    }
    writeln!(out)?;
    match &m.model {
        Model::Linear(l) => {
            writeln!(out, "intercept {:?}", l.intercept)?;
            writeln!(out, "beta {} {}", l.beta.len(), floats(&l.beta))?;
        }
        Model::KernelLogistic(k) => {
            writeln!(out, "theta {} {}", k.theta.len(), floats(&k.theta))?;
            let dim = k.landmarks.first().map_or(0, Vec::len);
            writeln!(out, "landmarks {} {}", k.landmarks.len(), dim)?;
            for l in &k.landmarks {
                writeln!(out, "{}", floats(l))?;
            }
        }
    }
    writeln!(out, "end")
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn err(&self, message: impl Into<String>) -> ModelError {
        ModelError::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Result<String, ModelError> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    /// Next line, which must start with `key`; returns the remaining tokens.
    fn field(&mut self, key: &str) -> Result<Vec<String>, ModelError> {
        let line = self.next_line()?;
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        Ok(tokens.map(str::to_string).collect())
    }

    fn scalar<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ModelError> {
        let tokens = self.field(key)?;
        match tokens.as_slice() {
            [v] => v
                .parse()
                .map_err(|_| self.err(format!("bad value for `{key}`"))),
            _ => Err(self.err(format!("`{key}` takes one value"))),
        }
    }

    fn parse_floats(&self, tokens: &[String]) -> Result<Vec<f64>, ModelError> {
        tokens
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| self.err(format!("bad number `{t}`")))
            })
            .collect()
    }

    fn array5(&mut self, key: &str) -> Result<[f64; NUM_FEATURES], ModelError> {
        let tokens = self.field(key)?;
        let v = self.parse_floats(&tokens)?;
        v.try_into()
            .map_err(|_| self.err(format!("`{key}` needs {NUM_FEATURES} values")))
    }

    /// `key <count> <values...>`
    fn counted(&mut self, key: &str) -> Result<Vec<String>, ModelError> {
        let mut tokens = self.field(key)?;
        if tokens.is_empty() {
            return Err(self.err(format!("`{key}` is missing its count")));
        }
        let n: usize = tokens[0]
            .parse()
            .map_err(|_| self.err(format!("bad count for `{key}`")))?;
        tokens.remove(0);
        if tokens.len() != n {
            return Err(self.err(format!(
                "`{key}` declares {n} values, found {}",
                tokens.len()
            )));
        }
        Ok(tokens)
    }
}

pub fn read_model<R: BufRead>(input: R) -> Result<TrainedModel, ModelError> {
    let mut r = Lines {
        inner: input.lines(),
        line: 0,
    };
    if r.next_line()? != MODEL_FILE_MAGIC {
        return Err(r.err(format!("expected `{MODEL_FILE_MAGIC}` header")));
    }
    let kind: String = r.scalar("kind")?;
    enum Hyper {
        Linear(Penalty, f64, bool, bool),
        Kernel(KernelConfig),
    }
    let hyper = match kind.as_str() {
        "linear" => {
            let p: String = r.scalar("penalty")?;
            let penalty =
                Penalty::parse(&p).ok_or_else(|| r.err(format!("unknown penalty `{p}`")))?;
            Hyper::Linear(
                penalty,
                r.scalar("alpha")?,
                r.scalar("fit_intercept")?,
                r.scalar("rank_deficient")?,
            )
        }
        "kernel-logistic" => Hyper::Kernel(KernelConfig {
            gamma: r.scalar("gamma")?,
            lambda: r.scalar("lambda")?,
            learning_rate: r.scalar("learning_rate")?,
            max_iterations: r.scalar("max_iterations")?,
            landmark_cap: r.scalar("landmark_cap")?,
            seed: r.scalar("seed")?,
        }),
        other => return Err(r.err(format!("unknown model kind `{other}`"))),
    };
    let mean = r.array5("mean")?;
    let std = r.array5("std")?;
    let flags = r.array5("constant")?;
    let standardization = Standardization {
        mean,
        std,
        constant: flags.map(|f| f != 0.0),
    };
    let tau: f64 = r.scalar("tau")?;
    let train_circuits = r.counted("train_circuits")?;
    let model = match hyper {
        Hyper::Linear(penalty, alpha, fit_intercept, rank_deficient) => {
            let intercept = r.scalar("intercept")?;
            let tokens = r.counted("beta")?;
            Model::Linear(LinearModel {
                beta: r.parse_floats(&tokens)?,
                intercept,
                alpha,
                penalty,
                fit_intercept,
                rank_deficient,
            })
        }
        Hyper::Kernel(config) => {
            let tokens = r.counted("theta")?;
            let theta = r.parse_floats(&tokens)?;
            let header = r.field("landmarks")?;
            let [n, dim] = header.as_slice() else {
                return Err(r.err("`landmarks` takes a count and a dimension"));
            };
            let n: usize = n.parse().map_err(|_| r.err("bad landmark count"))?;
            let dim: usize = dim.parse().map_err(|_| r.err("bad landmark dimension"))?;
            let mut landmarks = Vec::with_capacity(n);
            for _ in 0..n {
                let line = r.next_line()?;
                let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
                let row = r.parse_floats(&tokens)?;
                if row.len() != dim {
                    return Err(r.err(format!(
                        "landmark row has {} values, expected {dim}",
                        row.len()
                    )));
                }
                landmarks.push(row);
            }
            if theta.len() != landmarks.len() + 1 {
                return Err(r.err("theta length must be landmark count + 1"));
            }
            Model::KernelLogistic(KernelLogisticModel {
                theta,
                landmarks,
                config,
            })
        }
    };
    if r.next_line()? != "end" {
        return Err(r.err("expected `end`"));
    }
    Ok(TrainedModel {
        model,
        standardization,
        tau,
        train_circuits,
    })
}
