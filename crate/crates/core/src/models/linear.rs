// SPDX-License-Identifier: Apache-2.0

//! Penalized linear regression.
//!
//! Ridge minimizes `‖Xβ − Y‖² + α‖β‖²` and is solved in closed form through a
//! Cholesky factorization of `XᵀX + αI`. The L1 mode minimizes
//! `(1/2n)‖Xβ − Y‖² + α‖β‖₁` by cyclic coordinate descent. When an intercept
//! is fitted the data are centered first, so the intercept is never penalized.

use nalgebra::{DMatrix, DVector};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Penalty {
    /// Squared L2 norm of the coefficients.
    #[default]
    Ridge,
    /// L1 norm of the coefficients (per-sample loss scaling).
    Lasso,
}

impl Penalty {
    pub fn name(self) -> &'static str {
        match self {
            Penalty::Ridge => "ridge",
            Penalty::Lasso => "lasso",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ridge" | "l2" => Some(Penalty::Ridge),
            "lasso" | "l1" => Some(Penalty::Lasso),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub alpha: f64,
    pub penalty: Penalty,
    pub fit_intercept: bool,
    /// Set when α = 0 and the design was rank deficient; β is then the
    /// minimum-norm least-squares solution.
    pub rank_deficient: bool,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        predict_linear(self, x)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinearOptions {
    pub penalty: Penalty,
    pub fit_intercept: bool,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions {
            penalty: Penalty::Ridge,
            fit_intercept: true,
        }
    }
}

struct Centered {
    x: DMatrix<f64>,
    y: DVector<f64>,
    x_mean: Vec<f64>,
    y_mean: f64,
}

fn center<R: AsRef<[f64]>>(
    x: &[R],
    y: &[f64],
    fit_intercept: bool,
) -> Result<Centered, ModelError> {
    let n = x.len();
    if n == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    if y.len() != n {
        return Err(ModelError::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let d = x[0].as_ref().len();
    if let Some(bad) = x.iter().find(|r| r.as_ref().len() != d) {
        return Err(ModelError::DimensionMismatch {
            expected: d,
            got: bad.as_ref().len(),
        });
    }
    if x.iter()
        .flat_map(|r| r.as_ref())
        .chain(y)
        .any(|v| !v.is_finite())
    {
        return Err(ModelError::NonFinite);
    }
    let mut xm = DMatrix::from_fn(n, d, |i, j| x[i].as_ref()[j]);
    let mut yv = DVector::from_column_slice(y);
    let (x_mean, y_mean) = if fit_intercept {
        let means: Vec<f64> = (0..d).map(|j| xm.column(j).mean()).collect();
        for (j, m) in means.iter().enumerate() {
            xm.column_mut(j).add_scalar_mut(-m);
        }
        let ym = yv.mean();
        yv.add_scalar_mut(-ym);
        (means, ym)
    } else {
        (vec![0.0; d], 0.0)
    };
    Ok(Centered {
        x: xm,
        y: yv,
        x_mean,
        y_mean,
    })
}

/// Fit β (and an unpenalized intercept when requested) for penalty weight `alpha`.
pub fn fit_penalized_linear<R: AsRef<[f64]>>(
    x: &[R],
    y: &[f64],
    alpha: f64,
    options: LinearOptions,
) -> Result<LinearModel, ModelError> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(ModelError::InvalidHyperparameter(format!(
            "alpha = {alpha}"
        )));
    }
    let c = center(x, y, options.fit_intercept)?;
    let (beta, rank_deficient) = match options.penalty {
        Penalty::Ridge => ridge_solve(&c.x, &c.y, alpha),
        Penalty::Lasso => (lasso_coordinate_descent(&c.x, &c.y, alpha), false),
    };
    if rank_deficient {
        log::warn!("rank-deficient design with alpha = 0; returning minimum-norm solution");
    }
    let intercept = if options.fit_intercept {
        c.y_mean - c.x_mean.iter().zip(&beta).map(|(m, b)| m * b).sum::<f64>()
    } else {
        0.0
    };
    Ok(LinearModel {
        beta,
        intercept,
        alpha,
        penalty: options.penalty,
        fit_intercept: options.fit_intercept,
        rank_deficient,
    })
}

fn ridge_solve(x: &DMatrix<f64>, y: &DVector<f64>, alpha: f64) -> (Vec<f64>, bool) {
    let d = x.ncols();
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let gram = &xtx + DMatrix::identity(d, d) * alpha;
    if alpha == 0.0 {
        let svd = x.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let tol = smax * f64::EPSILON * x.nrows().max(d) as f64;
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        if rank < d {
            let beta = svd
                .solve(y, tol)
                .expect("svd was computed with both factors");
            return (beta.iter().copied().collect(), true);
        }
    }
    match gram.clone().cholesky() {
        Some(ch) => (ch.solve(&xty).iter().copied().collect(), false),
        // only reachable for α = 0 with a numerically singular Gram matrix
        None => {
            let beta = gram
                .svd(true, true)
                .solve(&xty, f64::EPSILON)
                .expect("svd was computed with both factors");
            (beta.iter().copied().collect(), true)
        }
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn lasso_coordinate_descent(x: &DMatrix<f64>, y: &DVector<f64>, alpha: f64) -> Vec<f64> {
    const MAX_SWEEPS: usize = 100_000;
    const TOL: f64 = 1e-12;
    let (n, d) = x.shape();
    let nf = n as f64;
    let col_sq: Vec<f64> = (0..d).map(|j| x.column(j).norm_squared() / nf).collect();
    let mut beta = vec![0.0; d];
    let mut residual = y.clone();
    for _ in 0..MAX_SWEEPS {
        let mut max_step: f64 = 0.0;
        for j in 0..d {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = x.column(j);
            let rho = col.dot(&residual) / nf + col_sq[j] * beta[j];
            let new = soft_threshold(rho, alpha) / col_sq[j];
            let step = new - beta[j];
            if step != 0.0 {
                residual.axpy(-step, &col, 1.0);
                beta[j] = new;
                max_step = max_step.max(step.abs());
            }
        }
        if max_step < TOL {
            break;
        }
    }
    beta
}

/// `intercept + x·β`, unclamped.
pub fn predict_linear(model: &LinearModel, x: &[f64]) -> f64 {
    model.intercept + model.beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}

/// Euclidean norm of β.
pub fn beta_norm(model: &LinearModel) -> f64 {
    model.beta.iter().map(|b| b * b).sum::<f64>().sqrt()
}
