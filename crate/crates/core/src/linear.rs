//! Elastic-net linear regression by cyclic coordinate descent.
//!
//! Minimizes `(1/2n) ||y - Xb - c||^2 + a*r*||b||_1 + (a*(1-r)/2) ||b||_2^2`
//! with soft-threshold coordinate updates on standardized columns. Constant
//! columns get coefficient zero and are absorbed by the intercept, which
//! makes the fit safe on rank-deficient stacking designs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElasticNetParams {
    /// Overall penalty strength (alpha).
    pub penalty_strength: f64,
    /// L1 share of the penalty (rho); 0 is pure ridge, 1 is pure lasso.
    pub l1_ratio: f64,
    pub max_sweeps: usize,
    /// Convergence threshold on the largest absolute coefficient change per
    /// sweep.
    pub tolerance: f64,
    pub standardize: bool,
    /// Unused: the cyclic solver is deterministic. Kept so learner configs
    /// carry a seed field uniformly.
    pub seed: u64,
}

impl Default for ElasticNetParams {
    fn default() -> ElasticNetParams {
        ElasticNetParams {
            penalty_strength: 1e-3,
            l1_ratio: 0.5,
            max_sweeps: 1000,
            tolerance: 1e-8,
            standardize: true,
            seed: 0,
        }
    }
}

impl ElasticNetParams {
    pub fn validate(&self) -> Result<()> {
        if !self.penalty_strength.is_finite() || self.penalty_strength < 0.0 {
            return Err(Error::InvalidInput("penalty_strength must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::InvalidInput("l1_ratio must be in [0, 1]".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidInput("max_sweeps must be positive".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// Coefficients on the original feature scale.
    coefficients: Vec<f64>,
    intercept: f64,
    feature_means: Vec<f64>,
    /// Population standard deviations; 1.0 recorded for constant columns.
    feature_scales: Vec<f64>,
}

impl LinearModel {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    pub fn feature_means(&self) -> &[f64] {
        &self.feature_means
    }

    pub fn feature_scales(&self) -> &[f64] {
        &self.feature_scales
    }

    /// Coefficient magnitudes on the standardized scale, the comparable
    /// notion of importance for a linear model.
    pub fn standardized_coefficient_magnitudes(&self) -> Vec<f64> {
        self.coefficients
            .iter()
            .zip(&self.feature_scales)
            .map(|(c, s)| (c * s).abs())
            .collect()
    }
}

fn soft_threshold(z: f64, threshold: f64) -> f64 {
    if z > threshold {
        z - threshold
    } else if z < -threshold {
        z + threshold
    } else {
        0.0
    }
}

struct Standardized {
    /// Centered (and scaled, when enabled) columns, column-major.
    columns: Vec<Vec<f64>>,
    means: Vec<f64>,
    scales: Vec<f64>,
    constant: Vec<bool>,
    /// Mean squared norm of each working column.
    col_norms: Vec<f64>,
}

fn standardize(x: &Matrix, scale: bool) -> Standardized {
    let n = x.n_rows();
    let d = x.n_cols();
    let mut columns = Vec::with_capacity(d);
    let mut means = Vec::with_capacity(d);
    let mut scales = Vec::with_capacity(d);
    let mut constant = Vec::with_capacity(d);
    let mut col_norms = Vec::with_capacity(d);
    for j in 0..d {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        let is_constant = sd == 0.0;
        let s = if scale && !is_constant { sd } else { 1.0 };
        let centered: Vec<f64> = col.iter().map(|v| (v - mean) / s).collect();
        let norm = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
        columns.push(centered);
        means.push(mean);
        scales.push(s);
        constant.push(is_constant);
        col_norms.push(norm);
    }
    Standardized { columns, means, scales, constant, col_norms }
}

/// Penalized least-squares objective on the working (standardized) scale.
fn objective(residuals: &[f64], beta: &[f64], params: &ElasticNetParams) -> f64 {
    let n = residuals.len() as f64;
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    sse / (2.0 * n)
        + params.penalty_strength * params.l1_ratio * l1
        + params.penalty_strength * (1.0 - params.l1_ratio) / 2.0 * l2
}

/// Runs the sweeps and also returns the objective value after each one,
/// which the tests use to check monotone descent.
#[allow(clippy::needless_range_loop)] // j is the coordinate being updated across four parallel arrays
fn coordinate_descent(
    std: &Standardized,
    y_centered: &[f64],
    params: &ElasticNetParams,
) -> (Vec<f64>, Vec<f64>) {
    let n = y_centered.len();
    let d = std.columns.len();
    let l1_penalty = params.penalty_strength * params.l1_ratio;
    let l2_penalty = params.penalty_strength * (1.0 - params.l1_ratio);
    let mut beta = vec![0.0; d];
    let mut residuals = y_centered.to_vec();
    let mut trajectory = Vec::new();
    for _ in 0..params.max_sweeps {
        let mut max_change = 0.0f64;
        for j in 0..d {
            if std.constant[j] {
                continue;
            }
            let col = &std.columns[j];
            let dot: f64 = col.iter().zip(residuals.iter()).map(|(c, r)| c * r).sum();
            let rho = dot / n as f64 + std.col_norms[j] * beta[j];
            let updated = soft_threshold(rho, l1_penalty) / (std.col_norms[j] + l2_penalty);
            let change = updated - beta[j];
            if change != 0.0 {
                for (r, c) in residuals.iter_mut().zip(col.iter()) {
                    *r -= c * change;
                }
                beta[j] = updated;
                max_change = max_change.max(change.abs());
            }
        }
        trajectory.push(objective(&residuals, &beta, params));
        if max_change < params.tolerance {
            break;
        }
    }
    (beta, trajectory)
}

pub fn fit_elastic_net(x: &Matrix, y: &[f64], params: &ElasticNetParams) -> Result<LinearModel> {
    params.validate()?;
    let n = x.n_rows();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("{} targets for {n} rows", y.len())));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("elastic net inputs".into()));
    }
    let std = standardize(x, params.standardize);
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let y_centered: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let (beta_std, _) = coordinate_descent(&std, &y_centered, params);
    let coefficients: Vec<f64> =
        beta_std.iter().zip(&std.scales).map(|(b, s)| b / s).collect();
    let intercept =
        y_mean - coefficients.iter().zip(&std.means).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearModel {
        coefficients,
        intercept,
        feature_means: std.means,
        feature_scales: std.scales,
    })
}

pub fn predict_linear(model: &LinearModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.coefficients.len() {
        return Err(Error::DimensionMismatch(format!(
            "input has {} features, model expects {}",
            x.len(),
            model.coefficients.len()
        )));
    }
    Ok(model.intercept + model.coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>())
}
