// SPDX-License-Identifier: Apache-2.0

//! Model fitting checked against finite differences, plain gradient descent
//! and straight-line reimplementations.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvopt_core::dataset::Standardization;
use tvopt_core::models::kernel::{
    fit_kernel_logistic_with_history, logistic_cost_grad, rbf_matrix, select_landmarks, sigmoid,
    FeatureMatrix,
};
use tvopt_core::models::{
    beta_norm, fit_penalized_linear, read_model, write_model, KernelConfig, KernelLogisticModel,
    LinearModel, LinearOptions, Model, Penalty, TrainedModel,
};

fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for instance in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + instance);
        let n = rng.gen_range(5..60);
        let d = rng.gen_range(1..6);
        let x = random_rows(&mut rng, n, d);
        let y: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
        let landmarks = select_landmarks(&x, rng.gen_range(1..20), instance);
        let gamma = rng.gen_range(0.1..2.0);
        let lambda = rng.gen_range(0.0..3.0);
        let phi = rbf_matrix(&x, &landmarks, gamma);
        let theta: Vec<f64> = (0..phi.cols).map(|_| rng.gen_range(-1.5..1.5)).collect();

        let (_, grad) = logistic_cost_grad(&theta, &phi, &y, lambda).unwrap();
        let fd: Vec<f64> = (0..theta.len())
            .map(|j| {
                let mut up = theta.clone();
                let mut down = theta.clone();
                up[j] += h;
                down[j] -= h;
                let cu = logistic_cost_grad(&up, &phi, &y, lambda).unwrap().0;
                let cd = logistic_cost_grad(&down, &phi, &y, lambda).unwrap().0;
                (cu - cd) / (2.0 * h)
            })
            .collect();
        let diff: Vec<f64> = grad.iter().zip(&fd).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&grad).max(norm(&fd)).max(1e-8);
        worst = worst.max(rel);
        assert!(rel < 1e-5, "instance {instance}: relative error {rel:e}");
    }
    assert!(worst < 1e-5);
}

#[test]
fn cost_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_rows(&mut rng, 40, 3);
    let y: Vec<f64> = (0..40).map(|i| f64::from(i % 3 == 0)).collect();
    let phi = rbf_matrix(&x, &select_landmarks(&x, 7, 1), 0.7);
    let theta: Vec<f64> = (0..phi.cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let lambda = 0.4;
    let m = 40.0;
    let mut loss = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let z: f64 = theta.iter().zip(phi.row(i)).map(|(t, v)| t * v).sum();
        let h = 1.0 / (1.0 + (-z).exp());
        loss += -yi * h.ln() - (1.0 - yi) * (1.0 - h).ln();
    }
    let reg: f64 = theta[1..].iter().map(|t| t * t).sum::<f64>() * lambda / (2.0 * m);
    let (cost, _) = logistic_cost_grad(&theta, &phi, &y, lambda).unwrap();
    assert_abs_diff_eq!(cost, loss / m + reg, epsilon = 1e-12);
}

/// Plain gradient descent on ‖y − Xβ − b‖² + α‖β‖² with a fixed safe step.
fn ridge_by_gradient_descent(x: &[Vec<f64>], y: &[f64], alpha: f64) -> (Vec<f64>, f64) {
    let n = x.len();
    let d = x[0].len();
    // crude Lipschitz bound: 2 (‖[X 1]‖_F² + α)
    let frob: f64 = x.iter().flatten().map(|v| v * v).sum::<f64>() + n as f64;
    let step = 1.0 / (2.0 * (frob + alpha));
    let mut beta = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..2_000_000 {
        let mut gb = 0.0;
        let mut g = vec![0.0; d];
        for (row, &yi) in x.iter().zip(y) {
            let r = row.iter().zip(&beta).map(|(a, c)| a * c).sum::<f64>() + b - yi;
            gb += 2.0 * r;
            for j in 0..d {
                g[j] += 2.0 * r * row[j];
            }
        }
        for j in 0..d {
            g[j] += 2.0 * alpha * beta[j];
        }
        if norm(&g).max(gb.abs()) < 1e-11 {
            break;
        }
        for j in 0..d {
            beta[j] -= step * g[j];
        }
        b -= step * gb;
    }
    (beta, b)
}

#[test]
fn ridge_closed_form_matches_iterative_minimizer() {
    for seed in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 3;
        let x = random_rows(&mut rng, 30, d);
        let y: Vec<f64> = x
            .iter()
            .map(|r| 0.5 + r[0] - 2.0 * r[1] + 0.3 * r[2] + rng.gen_range(-0.1..0.1))
            .collect();
        for alpha in [1e-4, 0.1, 1.0, 10.0] {
            let fit = fit_penalized_linear(&x, &y, alpha, LinearOptions::default()).unwrap();
            let (beta, b) = ridge_by_gradient_descent(&x, &y, alpha);
            assert_eq!(fit.beta.len(), d);
            for (got, want) in fit.beta.iter().zip(&beta) {
                assert_abs_diff_eq!(*got, *want, epsilon = 1e-6);
            }
            assert_abs_diff_eq!(fit.intercept, b, epsilon = 1e-6);
        }
    }
}

#[test]
fn ridge_norm_shrinks_across_the_alpha_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = random_rows(&mut rng, 50, 5);
    let y: Vec<f64> = x
        .iter()
        .map(|r| r.iter().sum::<f64>() + rng.gen_range(-0.5..0.5))
        .collect();
    let grid: Vec<f64> = (-4..=4).map(|e| 10f64.powi(e)).collect();
    let norms: Vec<f64> = grid
        .iter()
        .map(|&a| beta_norm(&fit_penalized_linear(&x, &y, a, LinearOptions::default()).unwrap()))
        .collect();
    assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
}

#[test]
fn kernel_prediction_matches_straight_line_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x = random_rows(&mut rng, 300, 5);
    let y: Vec<f64> = x.iter().map(|r| f64::from(r[0] * r[1] > 0.0)).collect();
    let cfg = KernelConfig {
        max_iterations: 200,
        landmark_cap: 64,
        ..KernelConfig::default()
    };
    let (model, _) = fit_kernel_logistic_with_history(&x, &y, cfg).unwrap();
    for row in x.iter().take(50) {
        let mut z = model.theta[0];
        for (t, l) in model.theta[1..].iter().zip(&model.landmarks) {
            let d2: f64 = row.iter().zip(l).map(|(a, b)| (a - b) * (a - b)).sum();
            z += t * (-cfg.gamma * d2).exp();
        }
        let p = (1.0 / (1.0 + (-z).exp())).clamp(1e-12, 1.0 - 1e-12);
        assert_abs_diff_eq!(model.predict_prob(row), p, epsilon = 1e-12);
    }
}

#[test]
fn training_cost_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random_rows(&mut rng, 400, 5);
    let y: Vec<f64> = x
        .iter()
        .map(|r| f64::from(r[0] + 0.5 * r[3] > 0.2))
        .collect();
    let cfg = KernelConfig {
        max_iterations: 300,
        learning_rate: 5.0,
        landmark_cap: 100,
        ..KernelConfig::default()
    };
    let (_, history) = fit_kernel_logistic_with_history(&x, &y, cfg).unwrap();
    assert!(history.costs.len() > 1);
    assert!(history.costs.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn feature_matrix_rows_are_the_feature_map() {
    let x = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
    let phi: FeatureMatrix = rbf_matrix(&x, &x, 2.0);
    assert_eq!(phi.row(0), &[1.0, 1.0, (-2.0f64).exp()][..]);
    assert_eq!(phi.row(1), &[1.0, (-2.0f64).exp(), 1.0][..]);
}

fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    lo..hi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sigmoid_stays_in_unit_interval(z in -1e4f64..1e4) {
        let s = sigmoid(z);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((sigmoid(-z) - (1.0 - s)).abs() < 1e-12);
    }

    #[test]
    fn shrinkage_is_monotone(seed in any::<u64>(), a in finite(1e-4, 1e3), ratio in finite(1.5, 100.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_rows(&mut rng, 25, 4);
        let y: Vec<f64> = (0..25).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let small = fit_penalized_linear(&x, &y, a, LinearOptions::default()).unwrap();
        let large = fit_penalized_linear(&x, &y, a * ratio, LinearOptions::default()).unwrap();
        prop_assert!(beta_norm(&large) <= beta_norm(&small) * (1.0 + 1e-12));
    }

    #[test]
    fn linear_model_file_roundtrips(
        beta in prop::collection::vec(-1e6f64..1e6, 5),
        intercept in -1e3f64..1e3,
        alpha in 0.0f64..10.0,
        lasso in any::<bool>(),
        tau in 0.0f64..=1.0,
    ) {
        let m = TrainedModel {
            model: Model::Linear(LinearModel {
                beta,
                intercept,
                alpha,
                penalty: if lasso { Penalty::Lasso } else { Penalty::Ridge },
                fit_intercept: true,
                rank_deficient: false,
            }),
            standardization: Standardization::identity(),
            tau,
            train_circuits: vec!["a".into(), "b".into()],
        };
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        prop_assert_eq!(read_model(&buf[..]).unwrap(), m);
    }

    #[test]
    fn kernel_model_file_roundtrips(
        theta in prop::collection::vec(-50.0f64..50.0, 1..8),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let landmarks = random_rows(&mut rng, theta.len() - 1, 5);
        let m = TrainedModel {
            model: Model::KernelLogistic(KernelLogisticModel {
                theta,
                landmarks,
                config: KernelConfig { seed, ..KernelConfig::default() },
            }),
            standardization: Standardization::identity(),
            tau: 0.9,
            train_circuits: vec![],
        };
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        prop_assert_eq!(read_model(&buf[..]).unwrap(), m);
    }
}
