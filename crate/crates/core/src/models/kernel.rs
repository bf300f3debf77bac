// SPDX-License-Identifier: Apache-2.0

//! Kernel logistic regression over an RBF landmark feature map.
//!
//! Each example `x` is lifted to `φ(x) = [1, exp(−γ‖x − l₁‖²), …, exp(−γ‖x − l_L‖²)]`
//! where the landmarks `l_j` are training rows. The weights θ minimize the
//! regularized cross-entropy
//!
//! ```text
//! J(θ) = (1/m) Σ [ −y log h − (1 − y) log(1 − h) ] + (λ / 2m) Σ_{j≥1} θ_j²,
//! h = 1 / (1 + exp(−θᵀφ))
//! ```
//!
//! by full-batch gradient descent starting from θ = 0.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ModelError;

/// Probabilities are kept this far from 0 and 1 before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;
/// Rows per reduction block; fixed so sums do not depend on the thread count.
const BLOCK_ROWS: usize = 256;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

fn compensated_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = CompensatedSum::default();
    for (x, y) in a.iter().zip(b) {
        acc.add(x * y);
    }
    acc.value()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Dense row-major matrix of lifted features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols));
        FeatureMatrix {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// `[1, exp(−γ‖x − l_1‖²), …]`.
pub fn rbf_map<L: AsRef<[f64]>>(x: &[f64], landmarks: &[L], gamma: f64) -> Vec<f64> {
    std::iter::once(1.0)
        .chain(
            landmarks
                .iter()
                .map(|l| (-gamma * squared_distance(x, l.as_ref())).exp()),
        )
        .collect()
}

pub fn rbf_matrix<R: AsRef<[f64]> + Sync, L: AsRef<[f64]> + Sync>(
    x: &[R],
    landmarks: &[L],
    gamma: f64,
) -> FeatureMatrix {
    let cols = landmarks.len() + 1;
    let data: Vec<f64> = x
        .par_iter()
        .flat_map_iter(|r| rbf_map(r.as_ref(), landmarks, gamma))
        .collect();
    FeatureMatrix {
        rows: x.len(),
        cols,
        data,
    }
}

/// Regularized cross-entropy and its gradient; θ₀ (intercept) is not penalized.
pub fn logistic_cost_grad(
    theta: &[f64],
    phi: &FeatureMatrix,
    y: &[f64],
    lambda: f64,
) -> Result<(f64, Vec<f64>), ModelError> {
    if theta.len() != phi.cols {
        return Err(ModelError::DimensionMismatch {
            expected: phi.cols,
            got: theta.len(),
        });
    }
    if y.len() != phi.rows {
        return Err(ModelError::DimensionMismatch {
            expected: phi.rows,
            got: y.len(),
        });
    }
    if phi.rows == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let m = phi.rows as f64;
    let cols = phi.cols;

    // Per-block partial sums, combined in block order.
    let partials: Vec<(CompensatedSum, Vec<CompensatedSum>)> = (0..phi.rows)
        .step_by(BLOCK_ROWS)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let end = (start + BLOCK_ROWS).min(phi.rows);
            let mut loss = CompensatedSum::default();
            let mut grad = vec![CompensatedSum::default(); cols];
            for (i, &yi) in y.iter().enumerate().take(end).skip(start) {
                let row = phi.row(i);
                let h = sigmoid(compensated_dot(theta, row));
                let hc = h.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                loss.add(-yi * hc.ln() - (1.0 - yi) * (1.0 - hc).ln());
                let err = h - yi;
                for (g, v) in grad.iter_mut().zip(row) {
                    g.add(v * err);
                }
            }
            (loss, grad)
        })
        .collect();

    let mut loss = CompensatedSum::default();
    let mut grad = vec![CompensatedSum::default(); cols];
    for (l, g) in partials {
        loss.add(l.value());
        for (acc, part) in grad.iter_mut().zip(g) {
            acc.add(part.value());
        }
    }
    let penalty: f64 = theta.iter().skip(1).map(|t| t * t).sum::<f64>() * lambda / (2.0 * m);
    let cost = loss.value() / m + penalty;
    let grad = grad
        .into_iter()
        .enumerate()
        .map(|(j, g)| {
            let reg = if j == 0 { 0.0 } else { lambda / m * theta[j] };
            g.value() / m + reg
        })
        .collect();
    Ok((cost, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub landmark_cap: usize,
    pub seed: u64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            gamma: 1.0,
            lambda: 1.0,
            learning_rate: 0.3,
            max_iterations: 2000,
            landmark_cap: 512,
            seed: 0,
        }
    }
}

/// Stop once the gradient norm falls below this.
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelLogisticModel {
    /// Intercept first, then one weight per landmark.
    pub theta: Vec<f64>,
    pub landmarks: Vec<Vec<f64>>,
    pub config: KernelConfig,
}

impl KernelLogisticModel {
    pub fn gamma(&self) -> f64 {
        self.config.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.config.lambda
    }

    pub fn predict_prob(&self, x: &[f64]) -> f64 {
        predict_prob(self, x)
    }
}

/// Optimizer record kept alongside a fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingHistory {
    /// Cost at θ = 0 followed by the cost after every accepted step.
    pub costs: Vec<f64>,
    pub iterations: usize,
    pub final_gradient_norm: f64,
}

fn check_config(cfg: &KernelConfig) -> Result<(), ModelError> {
    let bad = |what: String| Err(ModelError::InvalidHyperparameter(what));
    if !(cfg.gamma > 0.0 && cfg.gamma.is_finite()) {
        return bad(format!("gamma = {}", cfg.gamma));
    }
    if !(cfg.lambda >= 0.0 && cfg.lambda.is_finite()) {
        return bad(format!("lambda = {}", cfg.lambda));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return bad(format!("learning_rate = {}", cfg.learning_rate));
    }
    if cfg.landmark_cap == 0 {
        return bad("landmark_cap = 0".into());
    }
    Ok(())
}

/// Training rows used as landmarks; a seeded subset (kept in row order) above the cap.
pub fn select_landmarks<R: AsRef<[f64]>>(x: &[R], cap: usize, seed: u64) -> Vec<Vec<f64>> {
    if x.len() <= cap {
        return x.iter().map(|r| r.as_ref().to_vec()).collect();
    }
    let mut picked = sample(&mut ChaCha8Rng::seed_from_u64(seed), x.len(), cap).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| x[i].as_ref().to_vec()).collect()
}

pub fn fit_kernel_logistic<R: AsRef<[f64]> + Sync>(
    x: &[R],
    y: &[f64],
    config: KernelConfig,
) -> Result<KernelLogisticModel, ModelError> {
    fit_kernel_logistic_with_history(x, y, config).map(|(m, _)| m)
}

/// Gradient descent with step halving: a step that would raise the cost is
/// retried at half the learning rate, and the halved rate is kept.
pub fn fit_kernel_logistic_with_history<R: AsRef<[f64]> + Sync>(
    x: &[R],
    y: &[f64],
    config: KernelConfig,
) -> Result<(KernelLogisticModel, TrainingHistory), ModelError> {
    const MAX_HALVINGS: usize = 60;
    check_config(&config)?;
    if x.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if y.len() != x.len() {
        return Err(ModelError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(ModelError::NonBinaryLabels);
    }
    let positives = y.iter().filter(|&&v| v == 1.0).count();
    if positives == 0 || positives == y.len() {
        return Err(ModelError::SingleClass);
    }

    let landmarks = select_landmarks(x, config.landmark_cap, config.seed);
    let phi = rbf_matrix(x, &landmarks, config.gamma);
    let mut theta = vec![0.0; phi.cols];
    let (mut cost, mut grad) = logistic_cost_grad(&theta, &phi, y, config.lambda)?;
    let mut costs = vec![cost];
    let mut rate = config.learning_rate;
    let mut iterations = 0;
    let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();

    while iterations < config.max_iterations && norm(&grad) >= GRADIENT_TOLERANCE {
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - rate * g).collect();
            let (c, g) = logistic_cost_grad(&trial, &phi, y, config.lambda)?;
            if c <= cost {
                theta = trial;
                cost = c;
                grad = g;
                accepted = true;
                break;
            }
            rate *= 0.5;
        }
        if !accepted {
            break;
        }
        costs.push(cost);
        iterations += 1;
    }

    let history = TrainingHistory {
        costs,
        iterations,
        final_gradient_norm: norm(&grad),
    };
    Ok((
        KernelLogisticModel {
            theta,
            landmarks,
            config,
        },
        history,
    ))
}

/// `sigmoid(θ · φ(x))`, kept strictly inside (0, 1).
pub fn predict_prob(model: &KernelLogisticModel, x: &[f64]) -> f64 {
    let phi = rbf_map(x, &model.landmarks, model.config.gamma);
    sigmoid(compensated_dot(&model.theta, &phi)).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}
