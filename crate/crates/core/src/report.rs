//! Evaluation metrics and tree-ensemble feature importance.
//!
//! Importance walks every split node: weight counts uses of a feature, gain
//! and cover average its per-split gain and cover, and the totals are the
//! raw sums. Cover means rows for variance-mode trees and hessian mass for
//! Newton-mode trees, mirroring how the trees were grown. Linear models are
//! excluded; their standardized coefficient magnitudes are reported
//! separately.

use std::io;

use serde::{Deserialize, Serialize};

use crate::ensemble::{BoostModel, ForestModel};
use crate::error::{Error, Result};
use crate::tree::RegressionTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse: f64,
    pub mae: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Vec<f64>>,
}

fn check_pair(predictions: &[f64], actuals: &[f64]) -> Result<()> {
    if predictions.len() != actuals.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} actuals",
            predictions.len(),
            actuals.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput("no prediction pairs".into()));
    }
    Ok(())
}

pub fn rmse(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    check_pair(predictions, actuals)?;
    let mse = predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>()
        / predictions.len() as f64;
    Ok(mse.sqrt())
}

pub fn mae(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    check_pair(predictions, actuals)?;
    Ok(predictions.iter().zip(actuals).map(|(p, a)| (p - a).abs()).sum::<f64>()
        / predictions.len() as f64)
}

pub fn evaluate(predictions: &[f64], actuals: &[f64], keep_residuals: bool) -> Result<EvalReport> {
    Ok(EvalReport {
        rmse: rmse(predictions, actuals)?,
        mae: mae(predictions, actuals)?,
        n: predictions.len(),
        residuals: keep_residuals.then(|| {
            predictions.iter().zip(actuals).map(|(p, a)| p - a).collect()
        }),
    })
}

/// A model made of regression trees.
pub trait TreeEnsemble {
    fn trees(&self) -> &[RegressionTree];
    fn n_features(&self) -> usize;
}

impl TreeEnsemble for ForestModel {
    fn trees(&self) -> &[RegressionTree] {
        self.trees()
    }
    fn n_features(&self) -> usize {
        self.n_features()
    }
}

impl TreeEnsemble for BoostModel {
    fn trees(&self) -> &[RegressionTree] {
        self.trees()
    }
    fn n_features(&self) -> usize {
        self.trees().first().map_or(0, |t| t.n_features())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    /// How many splits use this feature.
    pub weight: u64,
    /// Average per-split gain.
    pub gain: f64,
    /// Average per-split cover.
    pub cover: f64,
    pub total_gain: f64,
    pub total_cover: f64,
}

/// Per-feature indicators, in the original feature order. Features that
/// never split hold all-zero entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub features: Vec<FeatureImportance>,
}

pub fn compute_importance<M: TreeEnsemble>(
    model: &M,
    feature_names: &[String],
) -> Result<ImportanceReport> {
    let d = model.n_features();
    // A boosted model that stopped before its first round has no trees and
    // therefore no feature count of its own; trust the names then.
    if d != 0 && feature_names.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "{} feature names for {d} features",
            feature_names.len()
        )));
    }
    let mut weight = vec![0u64; feature_names.len()];
    let mut total_gain = vec![0.0; feature_names.len()];
    let mut total_cover = vec![0.0; feature_names.len()];
    for tree in model.trees() {
        tree.for_each_split(|feature, gain, cover| {
            weight[feature] += 1;
            total_gain[feature] += gain;
            total_cover[feature] += cover;
        });
    }
    let features = feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| FeatureImportance {
            name: name.clone(),
            weight: weight[j],
            gain: if weight[j] > 0 { total_gain[j] / weight[j] as f64 } else { 0.0 },
            cover: if weight[j] > 0 { total_cover[j] / weight[j] as f64 } else { 0.0 },
            total_gain: total_gain[j],
            total_cover: total_cover[j],
        })
        .collect();
    Ok(ImportanceReport { features })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceIndicator {
    Weight,
    Gain,
    Cover,
    TotalGain,
    TotalCover,
}

impl ImportanceIndicator {
    pub const ALL: [ImportanceIndicator; 5] = [
        ImportanceIndicator::Weight,
        ImportanceIndicator::Gain,
        ImportanceIndicator::Cover,
        ImportanceIndicator::TotalGain,
        ImportanceIndicator::TotalCover,
    ];

    fn value_of(self, f: &FeatureImportance) -> f64 {
        match self {
            ImportanceIndicator::Weight => f.weight as f64,
            ImportanceIndicator::Gain => f.gain,
            ImportanceIndicator::Cover => f.cover,
            ImportanceIndicator::TotalGain => f.total_gain,
            ImportanceIndicator::TotalCover => f.total_cover,
        }
    }
}

/// Feature names sorted descending by the chosen indicator, ties broken by
/// name ascending.
pub fn rank_features(report: &ImportanceReport, indicator: ImportanceIndicator) -> Vec<String> {
    let mut order: Vec<&FeatureImportance> = report.features.iter().collect();
    order.sort_by(|a, b| {
        indicator
            .value_of(b)
            .partial_cmp(&indicator.value_of(a))
            .expect("finite importance")
            .then_with(|| a.name.cmp(&b.name))
    });
    order.into_iter().map(|f| f.name.clone()).collect()
}

/// CSV with one row per feature and all five indicators.
pub fn write_importance_csv<W: io::Write>(report: &ImportanceReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "weight", "gain", "cover", "total_gain", "total_cover"])?;
    for f in &report.features {
        w.write_record([
            f.name.clone(),
            f.weight.to_string(),
            format!("{:.6}", f.gain),
            format!("{:.6}", f.cover),
            format!("{:.6}", f.total_gain),
            format!("{:.6}", f.total_cover),
        ])?;
    }
    w.flush()?;
    Ok(())
}
