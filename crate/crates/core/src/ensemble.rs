//! Bagged and boosted tree ensembles.
//!
//! The forest draws a bootstrap sample per tree and fits variance-mode trees
//! with per-node sqrt feature subsampling; predictions are the plain mean of
//! member trees. Boosting fits Newton-mode trees to squared-error gradients
//! (hessians are all ones) against the running prediction, scaled by the
//! learning rate. Per-tree seeds derive from the ensemble seed by index, so
//! parallel and sequential fits produce identical models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tree::{
    fit_tree, predict_tree, FeatureSubsample, RegressionTree, SplitObjective, TreeParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    /// 200 sqrt-subsampled trees of depth at most 50, bootstrap on.
    fn default() -> ForestParams {
        ForestParams {
            n_estimators: 200,
            tree: TreeParams {
                max_depth: 50,
                feature_subsample: FeatureSubsample::Sqrt,
                ..TreeParams::default()
            },
            bootstrap: true,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<RegressionTree>,
    params: ForestParams,
}

impl ForestModel {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.trees[0].n_features()
    }
}

pub fn fit_forest(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<ForestModel> {
    params.tree.validate()?;
    if params.n_estimators == 0 {
        return Err(Error::InvalidInput("n_estimators must be positive".into()));
    }
    let n = x.n_rows();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("{} targets for {n} rows", y.len())));
    }
    let trees: Result<Vec<RegressionTree>> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ t as u64);
            if params.bootstrap {
                let indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let xt = x.select_rows(&indices)?;
                let yt: Vec<f64> = indices.iter().map(|&i| y[i]).collect();
                let tree_seed = rng.gen::<u64>();
                fit_tree(&xt, SplitObjective::VarianceReduction { targets: &yt }, &params.tree, tree_seed)
            } else {
                let tree_seed = rng.gen::<u64>();
                fit_tree(x, SplitObjective::VarianceReduction { targets: y }, &params.tree, tree_seed)
            }
        })
        .collect();
    Ok(ForestModel { trees: trees?, params: params.clone() })
}

/// Arithmetic mean of member predictions, summed left to right over tree
/// index.
pub fn predict_forest(model: &ForestModel, x: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for tree in &model.trees {
        sum += predict_tree(tree, x)?;
    }
    Ok(sum / model.trees.len() as f64)
}

/// Where boosting starts from before any trees are added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseScoreMode {
    TargetMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda_l2: f64,
    pub alpha_l1: f64,
    pub gamma_complexity: f64,
    pub base_score_mode: BaseScoreMode,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> BoostParams {
        BoostParams {
            n_estimators: 100,
            learning_rate: 0.1,
            max_depth: 6,
            lambda_l2: 1.0,
            alpha_l1: 0.0,
            gamma_complexity: 0.0,
            base_score_mode: BaseScoreMode::TargetMean,
            seed: 42,
        }
    }
}

impl BoostParams {
    /// Emulates a stock XGBoost regressor limited to 10 rounds: learning
    /// rate 0.3, depth 6, L2 of 1.
    pub fn xgboost_config(seed: u64) -> BoostParams {
        BoostParams { n_estimators: 10, learning_rate: 0.3, max_depth: 6, seed, ..BoostParams::default() }
    }

    /// Emulates a LightGBM-style configuration (200 shallow trees, learning
    /// rate 0.02) on this level-wise grower.
    pub fn lightgbm_config(seed: u64) -> BoostParams {
        BoostParams { n_estimators: 200, learning_rate: 0.02, max_depth: 2, seed, ..BoostParams::default() }
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: 1,
            min_gain: 0.0,
            feature_subsample: FeatureSubsample::All,
            lambda_l2: self.lambda_l2,
            alpha_l1: self.alpha_l1,
            gamma_complexity: self.gamma_complexity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidInput("learning_rate must be in (0, 1]".into()));
        }
        self.tree_params().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    base_score: f64,
    trees: Vec<RegressionTree>,
    learning_rate: f64,
    params: BoostParams,
}

impl BoostModel {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn params(&self) -> &BoostParams {
        &self.params
    }
}

/// Sequential Newton boosting on the squared-error loss: per round the
/// gradients are `prediction - target` with unit hessians. Rounds stop early
/// once a fitted tree degenerates to a single zero-valued leaf (nothing left
/// to correct).
pub fn fit_boost(x: &Matrix, y: &[f64], params: &BoostParams) -> Result<BoostModel> {
    params.validate()?;
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::EmptyInput("boost fit needs at least one row".into()));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("{} targets for {n} rows", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets".into()));
    }
    let base_score = match params.base_score_mode {
        BaseScoreMode::TargetMean => y.iter().sum::<f64>() / n as f64,
    };
    let tree_params = params.tree_params();
    let hessians = vec![1.0; n];
    let mut predictions = vec![base_score; n];
    let mut trees = Vec::with_capacity(params.n_estimators);
    for round in 0..params.n_estimators {
        let gradients: Vec<f64> = predictions.iter().zip(y).map(|(p, t)| p - t).collect();
        let tree = fit_tree(
            x,
            SplitObjective::NewtonGain { gradients: &gradients, hessians: &hessians },
            &tree_params,
            params.seed ^ round as u64,
        )?;
        if let crate::tree::Node::Leaf { value, .. } = tree.root() {
            if *value == 0.0 {
                break;
            }
        }
        for (i, row) in x.rows().enumerate() {
            predictions[i] += params.learning_rate * predict_tree(&tree, row)?;
        }
        trees.push(tree);
    }
    Ok(BoostModel { base_score, trees, learning_rate: params.learning_rate, params: params.clone() })
}

/// `base_score + learning_rate * sum of tree outputs`.
pub fn predict_boost(model: &BoostModel, x: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for tree in &model.trees {
        sum += predict_tree(tree, x)?;
    }
    Ok(model.base_score + model.learning_rate * sum)
}
