// SPDX-License-Identifier: Apache-2.0

//! Turning predictions into stop decisions, and the experiment sweeps.
//!
//! A policy scores every failing pattern of a trace and stops at the first
//! one whose score reaches `tau`. Stopping is correct when the intermediate
//! candidate set has already converged to the golden set (`m = 1`).

use std::collections::HashSet;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{extract_features, Dataset, Standardization};
use crate::diagnosis::DiagnosisTrace;
use crate::models::{
    fit_kernel_logistic, fit_penalized_linear, KernelConfig, KernelLogisticModel, LinearOptions,
    Model, ModelError,
};

/// Threshold candidates tried on the validation split.
pub const TAU_GRID: [f64; 7] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no test traces to evaluate")]
    EmptyTestSet,
    #[error("circuit `{0}` appears in both the training and the test set")]
    CircuitOverlap(String),
    #[error("learning-curve size {size} exceeds the {available} available training rows")]
    SizeTooLarge { size: usize, available: usize },
    #[error("learning-curve sizes must be positive and ascending")]
    UnsortedSizes,
    #[error("invalid threshold {0}")]
    InvalidTau(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What produces a per-pattern score.
#[derive(Debug, Clone, PartialEq)]
pub enum Scorer {
    Model(Model),
    /// Scores each row with its true label `y`.
    Oracle,
    Constant(f64),
}

impl Scorer {
    pub fn describe(&self) -> String {
        match self {
            Scorer::Model(m) => m.describe(),
            Scorer::Oracle => "oracle".into(),
            Scorer::Constant(c) => format!("constant({c})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminationPolicy {
    pub scorer: Scorer,
    pub standardization: Standardization,
    pub tau: f64,
}

impl TerminationPolicy {
    pub fn new(
        scorer: Scorer,
        standardization: Standardization,
        tau: f64,
    ) -> Result<Self, EvalError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(EvalError::InvalidTau(tau));
        }
        Ok(TerminationPolicy {
            scorer,
            standardization,
            tau,
        })
    }

    pub fn oracle() -> Self {
        TerminationPolicy {
            scorer: Scorer::Oracle,
            standardization: Standardization::identity(),
            tau: 1.0,
        }
    }

    /// Score of every failing pattern; linear outputs are clamped to [0, 1].
    pub fn scores(&self, trace: &DiagnosisTrace) -> Vec<f64> {
        match &self.scorer {
            Scorer::Oracle => trace.y_values.clone(),
            Scorer::Constant(c) => vec![*c; trace.len()],
            Scorer::Model(model) => extract_features(trace)
                .iter()
                .map(|row| {
                    let x = self.standardization.apply(&row.features);
                    match model {
                        Model::Linear(_) => model.score(&x).clamp(0.0, 1.0),
                        Model::KernelLogistic(_) => model.score(&x),
                    }
                })
                .collect(),
        }
    }

    fn with_tau(&self, tau: f64) -> Self {
        TerminationPolicy {
            tau,
            ..self.clone()
        }
    }
}

/// Stop step from precomputed scores: `(k*, terminated pattern)`, `k*` 1-based.
pub fn stop_point(scores: &[f64], tau: f64, trace: &DiagnosisTrace) -> (usize, usize) {
    let k = scores
        .iter()
        .position(|&s| s >= tau)
        .unwrap_or(trace.len() - 1);
    (k + 1, trace.failing_indices[k])
}

/// First failing pattern whose score reaches tau, or the last one.
pub fn apply_policy(policy: &TerminationPolicy, trace: &DiagnosisTrace) -> (usize, usize) {
    stop_point(&policy.scores(trace), policy.tau, trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitOutcome {
    pub circuit_id: String,
    pub k_star: usize,
    pub terminated_pattern: usize,
    pub total_patterns: usize,
    pub m_at_stop: f64,
    pub correct: bool,
    /// Stopped before the last failing pattern.
    pub stopped_early: bool,
}

impl CircuitOutcome {
    pub fn volume_saved(&self) -> f64 {
        (self.total_patterns - self.terminated_pattern) as f64 / self.total_patterns as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminationReport {
    pub diagnosis_accuracy: f64,
    pub volume_reduction: f64,
    pub per_circuit: Vec<CircuitOutcome>,
    pub tau: f64,
    pub model: String,
    pub corpus_seed: Option<u64>,
}

impl TerminationReport {
    pub fn from_outcomes(per_circuit: Vec<CircuitOutcome>, tau: f64, model: String) -> Self {
        let n = per_circuit.len() as f64;
        let diagnosis_accuracy = per_circuit.iter().filter(|o| o.correct).count() as f64 / n;
        let volume_reduction = per_circuit
            .iter()
            .map(CircuitOutcome::volume_saved)
            .sum::<f64>()
            / n;
        TerminationReport {
            diagnosis_accuracy,
            volume_reduction,
            per_circuit,
            tau,
            model,
            corpus_seed: None,
        }
    }

    pub const PER_CIRCUIT_HEADER: &'static str =
        "circuit_id,k_star,terminated_pattern,total_patterns,m_at_stop,correct";
    pub const SUMMARY_HEADER: &'static str =
        "model,tau,corpus_seed,circuits,diagnosis_accuracy,volume_reduction";

    pub fn write_per_circuit_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::PER_CIRCUIT_HEADER)?;
        for o in &self.per_circuit {
            writeln!(
                out,
                "{},{},{},{},{:.6},{}",
                o.circuit_id,
                o.k_star,
                o.terminated_pattern,
                o.total_patterns,
                o.m_at_stop,
                u8::from(o.correct)
            )?;
        }
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::SUMMARY_HEADER)?;
        let seed = self.corpus_seed.map(|s| s.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{:.6},{},{},{:.6},{:.6}",
            self.model,
            self.tau,
            seed,
            self.per_circuit.len(),
            self.diagnosis_accuracy,
            self.volume_reduction
        )
    }
}

fn outcome(trace: &DiagnosisTrace, scores: &[f64], tau: f64) -> CircuitOutcome {
    let (k_star, terminated_pattern) = stop_point(scores, tau, trace);
    let m = trace.m_values[k_star - 1];
    CircuitOutcome {
        circuit_id: trace.circuit_id.clone(),
        k_star,
        terminated_pattern,
        total_patterns: trace.total_patterns,
        m_at_stop: m,
        correct: m == 1.0,
        stopped_early: k_star < trace.len(),
    }
}

/// Apply the policy to every test trace and summarize.
pub fn evaluate(
    policy: &TerminationPolicy,
    traces: &[DiagnosisTrace],
) -> Result<TerminationReport, EvalError> {
    if traces.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let per_circuit = traces
        .par_iter()
        .map(|t| outcome(t, &policy.scores(t), policy.tau))
        .collect();
    Ok(TerminationReport::from_outcomes(
        per_circuit,
        policy.tau,
        policy.scorer.describe(),
    ))
}

/// Refuse to evaluate on circuits the model was trained on.
pub fn check_disjoint<'a>(
    train_circuits: impl IntoIterator<Item = &'a String>,
    test: &[DiagnosisTrace],
) -> Result<(), EvalError> {
    let train: HashSet<&str> = train_circuits.into_iter().map(String::as_str).collect();
    match test.iter().find(|t| train.contains(t.circuit_id.as_str())) {
        Some(t) => Err(EvalError::CircuitOverlap(t.circuit_id.clone())),
        None => Ok(()),
    }
}

/// Pick tau on validation traces: highest accuracy among thresholds that
/// stop early on at least one circuit, ties broken by larger reduction then
/// smaller tau. Falls back to plain highest accuracy when no threshold ever
/// stops early.
pub fn select_tau(
    policy: &TerminationPolicy,
    validation: &[DiagnosisTrace],
    grid: &[f64],
) -> Result<(f64, TerminationReport), EvalError> {
    if validation.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let scores: Vec<Vec<f64>> = validation.par_iter().map(|t| policy.scores(t)).collect();
    let mut best: Option<(bool, TerminationReport)> = None;
    for &tau in grid {
        let report = TerminationReport::from_outcomes(
            validation
                .iter()
                .zip(&scores)
                .map(|(t, s)| outcome(t, s, tau))
                .collect(),
            tau,
            policy.scorer.describe(),
        );
        let saves = report.per_circuit.iter().any(|o| o.stopped_early);
        let better = match &best {
            None => true,
            Some((best_saves, b)) => {
                (saves, report.diagnosis_accuracy, report.volume_reduction)
                    > (*best_saves, b.diagnosis_accuracy, b.volume_reduction)
            }
        };
        if better {
            best = Some((saves, report));
        }
    }
    let (_, report) = best.expect("non-empty grid");
    Ok((report.tau, report))
}

/// Fraction of rows whose thresholded score matches the converged label.
pub fn classification_accuracy(model: &Model, data: &Dataset, threshold: f64) -> f64 {
    let hits = data
        .rows
        .par_iter()
        .filter(|r| (model.score(&r.features) >= threshold) == r.converged())
        .count();
    hits as f64 / data.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaPoint {
    pub alpha: f64,
    pub tau: f64,
    /// Policy diagnosis accuracy on the test traces.
    pub accuracy: f64,
    pub volume_reduction: f64,
    /// Thresholded-regression accuracy on the test rows at `tau`.
    pub row_accuracy: f64,
    pub beta: Vec<f64>,
}

pub struct SweepData<'a> {
    /// Standardized training rows.
    pub train: &'a Dataset,
    /// Standardized test rows (for the row-level metric).
    pub test_rows: &'a Dataset,
    pub standardization: &'a Standardization,
    pub validation: &'a [DiagnosisTrace],
    pub test: &'a [DiagnosisTrace],
}

/// One linear model per alpha, each run through tau selection and evaluation.
pub fn sweep_alpha(
    alphas: &[f64],
    data: &SweepData<'_>,
    options: LinearOptions,
) -> Result<Vec<AlphaPoint>, EvalError> {
    let x = data.train.features();
    let y = data.train.labels();
    alphas
        .par_iter()
        .map(|&alpha| {
            let model = fit_penalized_linear(&x, &y, alpha, options)?;
            let beta = model.beta.clone();
            let base = TerminationPolicy::new(
                Scorer::Model(Model::Linear(model.clone())),
                data.standardization.clone(),
                0.5,
            )?;
            let (tau, _) = select_tau(&base, data.validation, &TAU_GRID)?;
            let report = evaluate(&base.with_tau(tau), data.test)?;
            let clamped = Model::Linear(model);
            let row_accuracy = data
                .test_rows
                .rows
                .iter()
                .filter(|r| (clamped.score(&r.features).clamp(0.0, 1.0) >= tau) == r.converged())
                .count() as f64
                / data.test_rows.len() as f64;
            Ok(AlphaPoint {
                alpha,
                tau,
                accuracy: report.diagnosis_accuracy,
                volume_reduction: report.volume_reduction,
                row_accuracy,
                beta,
            })
        })
        .collect()
}

/// Coefficient vectors per alpha on the (standardized) training rows.
pub fn beta_weight_report(
    alphas: &[f64],
    train: &Dataset,
    options: LinearOptions,
) -> Result<Vec<(f64, Vec<f64>)>, EvalError> {
    let x = train.features();
    let y = train.labels();
    alphas
        .par_iter()
        .map(|&alpha| Ok((alpha, fit_penalized_linear(&x, &y, alpha, options)?.beta)))
        .collect()
}

/// Row indices of nested training subsets: each subset is a prefix of one
/// seeded permutation, re-sorted into original row order.
pub fn nested_subsets(
    total: usize,
    sizes: &[usize],
    seed: u64,
) -> Result<Vec<Vec<usize>>, EvalError> {
    if sizes.windows(2).any(|w| w[0] > w[1]) || sizes.first() == Some(&0) {
        return Err(EvalError::UnsortedSizes);
    }
    if let Some(&size) = sizes.iter().find(|&&s| s > total) {
        return Err(EvalError::SizeTooLarge {
            size,
            available: total,
        });
    }
    let mut perm: Vec<usize> = (0..total).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(sizes
        .iter()
        .map(|&s| {
            let mut idx = perm[..s].to_vec();
            idx.sort_unstable();
            idx
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub train_size: usize,
    pub test_score: f64,
}

/// Retrain the classifier on nested subsamples and score each on the test rows.
pub fn learning_curve(
    sizes: &[usize],
    train: &Dataset,
    test: &Dataset,
    config: KernelConfig,
    seed: u64,
) -> Result<Vec<CurvePoint>, EvalError> {
    let subsets = nested_subsets(train.len(), sizes, seed)?;
    let x = train.features();
    let y = train.binary_labels();
    subsets
        .par_iter()
        .map(|idx| {
            let xs: Vec<_> = idx.iter().map(|&i| x[i]).collect();
            let ys: Vec<_> = idx.iter().map(|&i| y[i]).collect();
            let model = Model::KernelLogistic(fit_kernel_logistic(&xs, &ys, config)?);
            Ok(CurvePoint {
                train_size: idx.len(),
                test_score: classification_accuracy(&model, test, 0.5),
            })
        })
        .collect()
}

/// Fit the classifier on all training rows.
pub fn fit_classifier(
    train: &Dataset,
    config: KernelConfig,
) -> Result<KernelLogisticModel, EvalError> {
    Ok(fit_kernel_logistic(
        &train.features(),
        &train.binary_labels(),
        config,
    )?)
}

pub fn write_sweep_alpha_csv<W: Write>(points: &[AlphaPoint], mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "alpha,tau,diagnosis_accuracy,volume_reduction,row_accuracy"
    )?;
    for p in points {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6}",
            p.alpha, p.tau, p.accuracy, p.volume_reduction, p.row_accuracy
        )?;
    }
    Ok(())
}

pub fn write_beta_weights_csv<W: Write>(rows: &[(f64, Vec<f64>)], mut out: W) -> io::Result<()> {
    writeln!(out, "alpha,beta1,beta2,beta3,beta4,beta5")?;
    for (alpha, beta) in rows {
        write!(out, "{alpha}")?;
        for b in beta {
            write!(out, ",{b:.6}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_learning_curve_csv<W: Write>(points: &[CurvePoint], mut out: W) -> io::Result<()> {
    writeln!(out, "train_size,test_score")?;
    for p in points {
        writeln!(out, "{},{:.6}", p.train_size, p.test_score)?;
    }
    Ok(())
}
