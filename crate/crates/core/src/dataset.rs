// SPDX-License-Identifier: Apache-2.0

//! Five-feature dataset built from diagnosis traces.
//!
//! | feature | meaning                                         |
//! |---------|-------------------------------------------------|
//! | x1      | number of primary inputs of the circuit          |
//! | x2      | failing patterns applied so far (k)              |
//! | x3      | index of the circuit's first failing pattern     |
//! | x4      | index of this failing pattern                    |
//! | x5      | index of the circuit's last failing pattern      |

use std::collections::{HashMap, HashSet};
use std::io::{self, Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diagnosis::DiagnosisTrace;

pub const NUM_FEATURES: usize = 5;
pub const DATASET_CSV_HEADER: &str = "circuit_id,x1,x2,x3,x4,x5,y";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset is empty")]
    Empty,
    #[error("train fraction {fraction} over {circuits} circuits leaves one side empty")]
    EmptySplit { fraction: f64, circuits: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed dataset record {record}: {message}")]
    Malformed { record: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub circuit_id: String,
    pub features: [f64; NUM_FEATURES],
    pub y: f64,
}

impl FeatureRow {
    /// Binary class used by the classifier: 1 once diagnosis has converged.
    pub fn converged(&self) -> bool {
        self.y == 1.0
    }
}

/// Per-feature affine scaling fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: [f64; NUM_FEATURES],
    pub std: [f64; NUM_FEATURES],
    /// Features with (numerically) zero spread are passed through unchanged.
    pub constant: [bool; NUM_FEATURES],
}

impl Standardization {
    /// Population statistics of `rows`.
    pub fn fit(rows: &[FeatureRow]) -> Self {
        assert!(!rows.is_empty(), "cannot standardize an empty dataset");
        let n = rows.len() as f64;
        let mut mean = [0.0; NUM_FEATURES];
        let mut std = [0.0; NUM_FEATURES];
        let mut constant = [false; NUM_FEATURES];
        for j in 0..NUM_FEATURES {
            mean[j] = rows.iter().map(|r| r.features[j]).sum::<f64>() / n;
            let var = rows
                .iter()
                .map(|r| (r.features[j] - mean[j]).powi(2))
                .sum::<f64>()
                / n;
            std[j] = var.sqrt();
            constant[j] = std[j] <= 1e-12 * (1.0 + mean[j].abs());
        }
        Standardization {
            mean,
            std,
            constant,
        }
    }

    pub fn identity() -> Self {
        Standardization {
            mean: [0.0; NUM_FEATURES],
            std: [1.0; NUM_FEATURES],
            constant: [true; NUM_FEATURES],
        }
    }

    pub fn apply(&self, x: &[f64; NUM_FEATURES]) -> [f64; NUM_FEATURES] {
        std::array::from_fn(|j| {
            if self.constant[j] {
                x[j]
            } else {
                (x[j] - self.mean[j]) / self.std[j]
            }
        })
    }
}

/// Rows plus the scaling applied to them, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<FeatureRow>,
    pub standardization: Option<Standardization>,
}

impl Dataset {
    pub fn new(rows: Vec<FeatureRow>) -> Self {
        Dataset {
            rows,
            standardization: None,
        }
    }

    pub fn from_traces<'a>(traces: impl IntoIterator<Item = &'a DiagnosisTrace>) -> Self {
        Dataset::new(traces.into_iter().flat_map(extract_features).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn features(&self) -> Vec<[f64; NUM_FEATURES]> {
        self.rows.iter().map(|r| r.features).collect()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y).collect()
    }

    pub fn binary_labels(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| if r.converged() { 1.0 } else { 0.0 })
            .collect()
    }

    /// Distinct circuit ids in first-appearance order.
    pub fn circuit_ids(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert(r.circuit_id.as_str()))
            .map(|r| r.circuit_id.clone())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{DATASET_CSV_HEADER}")?;
        for r in &self.rows {
            write!(out, "{}", r.circuit_id)?;
            for v in r.features {
                if self.standardization.is_some() {
                    write!(out, ",{v:.6}")?;
                } else {
                    write!(out, ",{v}")?;
                }
            }
            writeln!(out, ",{:.6}", r.y)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, DatasetError> {
        let mut reader = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let malformed = |message: String| DatasetError::Malformed {
                record: i + 1,
                message,
            };
            if rec.len() != NUM_FEATURES + 2 {
                return Err(malformed(format!("expected 7 fields, got {}", rec.len())));
            }
            let num = |j: usize| -> Result<f64, DatasetError> {
                rec[j]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| malformed(format!("field {}: {e}", j + 1)))
            };
            let mut features = [0.0; NUM_FEATURES];
            for (j, f) in features.iter_mut().enumerate() {
                *f = num(j + 1)?;
            }
            rows.push(FeatureRow {
                circuit_id: rec[0].to_string(),
                features,
                y: num(NUM_FEATURES + 1)?,
            });
        }
        if rows.is_empty() {
            return Err(DatasetError::Empty);
        }
        Ok(Dataset::new(rows))
    }
}

/// One row per failing pattern of the trace.
pub fn extract_features(trace: &DiagnosisTrace) -> Vec<FeatureRow> {
    let first = trace.failing_indices[0] as f64;
    let last = *trace.failing_indices.last().unwrap() as f64;
    trace
        .failing_indices
        .iter()
        .zip(&trace.y_values)
        .enumerate()
        .map(|(k, (&idx, &y))| FeatureRow {
            circuit_id: trace.circuit_id.clone(),
            features: [
                trace.num_inputs as f64,
                (k + 1) as f64,
                first,
                idx as f64,
                last,
            ],
            y,
        })
        .collect()
}

/// Shuffle circuit ids with a seeded generator and assign the first share to train.
pub fn split_circuits(
    ids: &[String],
    train_fraction: f64,
    seed: u64,
) -> Result<(HashSet<String>, HashSet<String>), DatasetError> {
    let n_train = (train_fraction * ids.len() as f64).round() as usize;
    if !(train_fraction > 0.0 && train_fraction < 1.0) || n_train == 0 || n_train >= ids.len() {
        return Err(DatasetError::EmptySplit {
            fraction: train_fraction,
            circuits: ids.len(),
        });
    }
    let mut order = ids.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order.split_off(n_train);
    Ok((order.into_iter().collect(), test.into_iter().collect()))
}

/// Split by circuit: every row of a circuit lands on the same side.
pub fn split(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DatasetError> {
    if dataset.is_empty() {
        return Err(DatasetError::Empty);
    }
    let (train_ids, _) = split_circuits(&dataset.circuit_ids(), train_fraction, seed)?;
    let (train, test): (Vec<_>, Vec<_>) = dataset
        .rows
        .iter()
        .cloned()
        .partition(|r| train_ids.contains(&r.circuit_id));
    let keep = |rows| Dataset {
        rows,
        standardization: dataset.standardization.clone(),
    };
    Ok((keep(train), keep(test)))
}

/// Fit scaling on `train` and apply it to `train` and every dataset in `others`.
pub fn standardize_fit_apply(
    train: &Dataset,
    others: &[&Dataset],
) -> (Standardization, Dataset, Vec<Dataset>) {
    let stats = Standardization::fit(&train.rows);
    let apply = |d: &Dataset| Dataset {
        rows: d
            .rows
            .iter()
            .map(|r| FeatureRow {
                features: stats.apply(&r.features),
                ..r.clone()
            })
            .collect(),
        standardization: Some(stats.clone()),
    };
    let t = apply(train);
    let o = others.iter().map(|d| apply(d)).collect();
    (stats, t, o)
}

/// Rows grouped by circuit, preserving row order within each circuit.
pub fn group_by_circuit(rows: &[FeatureRow]) -> HashMap<&str, Vec<&FeatureRow>> {
    let mut groups: HashMap<&str, Vec<&FeatureRow>> = HashMap::new();
    for r in rows {
        groups.entry(r.circuit_id.as_str()).or_default().push(r);
    }
    groups
}
