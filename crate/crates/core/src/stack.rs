//! Cross-validated stacked regression.
//!
//! Base learners are fitted k times on all-but-one-fold and predict the
//! held-out fold, so every training row gets a prediction from a model that
//! never saw it. Those out-of-fold columns (optionally alongside the
//! original features) train an elastic-net meta-learner; the base models are
//! then refitted on the full data for prediction time. Per-(learner, fold)
//! seeds derive from the learner name, so reordering the spec list never
//! changes what any base model learns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{
    fit_boost, fit_forest, predict_boost, predict_forest, BoostModel, BoostParams, ForestModel,
    ForestParams,
};
use crate::error::{Error, Result};
use crate::linear::{fit_elastic_net, predict_linear, ElasticNetParams, LinearModel};
use crate::matrix::Matrix;

/// A fitted model that maps a feature vector to a value.
pub trait Predictor {
    fn predict(&self, x: &[f64]) -> Result<f64>;
}

/// Anything the stack can use as a base learner.
pub trait Learner: Sync {
    type Fitted: Predictor + Send;
    fn name(&self) -> &str;
    /// Fits with the given seed, which overrides any seed the learner's own
    /// configuration carries.
    fn fit(&self, x: &Matrix, y: &[f64], seed: u64) -> Result<Self::Fitted>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "snake_case")]
pub enum LearnerKind {
    RandomForest(ForestParams),
    Boost(BoostParams),
    ElasticNet(ElasticNetParams),
}

/// A named base-learner configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LearnerKind,
}

impl LearnerSpec {
    pub fn random_forest(name: &str, params: ForestParams) -> LearnerSpec {
        LearnerSpec { name: name.into(), kind: LearnerKind::RandomForest(params) }
    }

    pub fn boost(name: &str, params: BoostParams) -> LearnerSpec {
        LearnerSpec { name: name.into(), kind: LearnerKind::Boost(params) }
    }

    pub fn elastic_net(name: &str, params: ElasticNetParams) -> LearnerSpec {
        LearnerSpec { name: name.into(), kind: LearnerKind::ElasticNet(params) }
    }
}

/// A fitted base model of any supported kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum FittedBase {
    Forest(ForestModel),
    Boost(BoostModel),
    ElasticNet(LinearModel),
}

impl Predictor for FittedBase {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            FittedBase::Forest(m) => predict_forest(m, x),
            FittedBase::Boost(m) => predict_boost(m, x),
            FittedBase::ElasticNet(m) => predict_linear(m, x),
        }
    }
}

impl Learner for LearnerSpec {
    type Fitted = FittedBase;

    fn name(&self) -> &str {
        &self.name
    }

    fn fit(&self, x: &Matrix, y: &[f64], seed: u64) -> Result<FittedBase> {
        match &self.kind {
            LearnerKind::RandomForest(params) => {
                let params = ForestParams { seed, ..params.clone() };
                Ok(FittedBase::Forest(fit_forest(x, y, &params)?))
            }
            LearnerKind::Boost(params) => {
                let params = BoostParams { seed, ..params.clone() };
                Ok(FittedBase::Boost(fit_boost(x, y, &params)?))
            }
            LearnerKind::ElasticNet(params) => {
                let params = ElasticNetParams { seed, ..*params };
                Ok(FittedBase::ElasticNet(fit_elastic_net(x, y, &params)?))
            }
        }
    }
}

/// Stable 64-bit FNV-1a over the seed, learner name, and fold id. Written
/// out by hand so seeds never depend on the standard library's unstable
/// hasher.
pub fn derive_seed(global_seed: u64, name: &str, fold: u64) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(PRIME);
        }
    };
    eat(&global_seed.to_le_bytes());
    eat(&[0x1f]);
    eat(name.as_bytes());
    eat(&[0x1f]);
    eat(&fold.to_le_bytes());
    h
}

/// Fold tag used for the full-data refit, distinct from every fold id.
const FULL_FIT_FOLD: u64 = u64::MAX;

/// Assignment of each row to one of k folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    assignment: Vec<usize>,
    k: usize,
}

impl FoldPlan {
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded shuffle of the row indices, then contiguous near-equal blocks:
/// fold sizes differ by at most one.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidInput("need at least 2 folds".into()));
    }
    if k > n {
        return Err(Error::InvalidInput(format!("{k} folds exceed {n} rows")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let base = n / k;
    let remainder = n % k;
    let mut assignment = vec![0usize; n];
    let mut pos = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < remainder);
        for &row in &order[pos..pos + size] {
            assignment[row] = fold;
        }
        pos += size;
    }
    Ok(FoldPlan { assignment, k })
}

/// Out-of-fold prediction matrix (`n` rows, one column per learner) for any
/// learner type. Every cell is written exactly once, by a model fitted
/// without that cell's row.
pub fn oof_with_learners<L: Learner>(
    x: &Matrix,
    y: &[f64],
    learners: &[L],
    plan: &FoldPlan,
    global_seed: u64,
) -> Result<Matrix> {
    let n = x.n_rows();
    if plan.len() != n || y.len() != n {
        return Err(Error::DimensionMismatch(
            "fold plan, targets, and matrix disagree on row count".into(),
        ));
    }
    if learners.is_empty() {
        return Err(Error::EmptyInput("no learners".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..learners.len())
        .flat_map(|s| (0..plan.k()).map(move |f| (s, f)))
        .collect();
    // One job per (learner column, fold): the held-out cells it fills in.
    type ColumnCells = (usize, Vec<(usize, f64)>);
    let results: Result<Vec<ColumnCells>> = jobs
        .par_iter()
        .map(|&(s, fold)| {
            let train_rows: Vec<usize> =
                (0..n).filter(|&i| plan.assignment()[i] != fold).collect();
            let test_rows: Vec<usize> =
                (0..n).filter(|&i| plan.assignment()[i] == fold).collect();
            let x_train = x.select_rows(&train_rows)?;
            let y_train: Vec<f64> = train_rows.iter().map(|&i| y[i]).collect();
            let seed = derive_seed(global_seed, learners[s].name(), fold as u64);
            let model = learners[s].fit(&x_train, &y_train, seed)?;
            let mut cells = Vec::with_capacity(test_rows.len());
            for &i in &test_rows {
                cells.push((i, model.predict(x.row(i))?));
            }
            Ok((s, cells))
        })
        .collect();
    let mut oof = Matrix::from_flat(n, learners.len(), vec![0.0; n * learners.len()])?;
    for (s, cells) in results? {
        for (i, value) in cells {
            oof.set(i, s, value);
        }
    }
    Ok(oof)
}

/// Out-of-fold matrix for the concrete learner-spec list.
pub fn oof_predictions(
    x: &Matrix,
    y: &[f64],
    specs: &[LearnerSpec],
    plan: &FoldPlan,
    global_seed: u64,
) -> Result<Matrix> {
    oof_with_learners(x, y, specs, plan, global_seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackParams {
    pub base_specs: Vec<LearnerSpec>,
    pub meta_params: ElasticNetParams,
    pub k_folds: usize,
    /// Feed the original features to the meta-learner alongside the base
    /// predictions.
    pub use_features_in_secondary: bool,
    pub global_seed: u64,
}

impl Default for StackParams {
    fn default() -> StackParams {
        StackParams {
            base_specs: Vec::new(),
            meta_params: ElasticNetParams::default(),
            k_folds: 5,
            use_features_in_secondary: true,
            global_seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackModel {
    base_models: Vec<FittedBase>,
    meta: LinearModel,
    /// Base names first, then original feature names when passthrough is on.
    meta_columns: Vec<String>,
    n_features: usize,
    params: StackParams,
}

impl StackModel {
    pub fn base_models(&self) -> &[FittedBase] {
        &self.base_models
    }

    pub fn meta(&self) -> &LinearModel {
        &self.meta
    }

    pub fn meta_columns(&self) -> &[String] {
        &self.meta_columns
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn params(&self) -> &StackParams {
        &self.params
    }
}

fn validate_specs(specs: &[LearnerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::EmptyInput("stack needs at least one base learner".into()));
    }
    for (i, a) in specs.iter().enumerate() {
        for b in &specs[i + 1..] {
            if a.name == b.name {
                return Err(Error::InvalidInput(format!("duplicate learner name {:?}", a.name)));
            }
        }
    }
    Ok(())
}

/// Builds the meta design `[OOF columns | original features?]`, fits the
/// elastic-net meta-learner on it, and refits every base spec on the full
/// data.
pub fn fit_stack(
    x: &Matrix,
    y: &[f64],
    feature_names: &[String],
    params: &StackParams,
) -> Result<StackModel> {
    validate_specs(&params.base_specs)?;
    if feature_names.len() != x.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature names for {} columns",
            feature_names.len(),
            x.n_cols()
        )));
    }
    let n = x.n_rows();
    let plan = make_folds(n, params.k_folds, params.global_seed)?;
    let oof = oof_predictions(x, y, &params.base_specs, &plan, params.global_seed)?;

    let n_bases = params.base_specs.len();
    let meta_width = n_bases + if params.use_features_in_secondary { x.n_cols() } else { 0 };
    let mut meta_data = Vec::with_capacity(n * meta_width);
    for i in 0..n {
        meta_data.extend_from_slice(oof.row(i));
        if params.use_features_in_secondary {
            meta_data.extend_from_slice(x.row(i));
        }
    }
    let meta_x = Matrix::from_flat(n, meta_width, meta_data)?;
    let meta = fit_elastic_net(&meta_x, y, &params.meta_params)?;

    let base_models: Result<Vec<FittedBase>> = params
        .base_specs
        .par_iter()
        .map(|spec| spec.fit(x, y, derive_seed(params.global_seed, &spec.name, FULL_FIT_FOLD)))
        .collect();

    let mut meta_columns: Vec<String> =
        params.base_specs.iter().map(|s| s.name.clone()).collect();
    if params.use_features_in_secondary {
        meta_columns.extend(feature_names.iter().cloned());
    }
    Ok(StackModel {
        base_models: base_models?,
        meta,
        meta_columns,
        n_features: x.n_cols(),
        params: params.clone(),
    })
}

/// Assembles `[base predictions | x?]` and applies the meta-learner.
pub fn predict_stack(model: &StackModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.n_features {
        return Err(Error::DimensionMismatch(format!(
            "input has {} features, stack expects {}",
            x.len(),
            model.n_features
        )));
    }
    let mut meta_input = Vec::with_capacity(model.meta_columns.len());
    for base in &model.base_models {
        meta_input.push(base.predict(x)?);
    }
    if model.params.use_features_in_secondary {
        meta_input.extend_from_slice(x);
    }
    predict_linear(&model.meta, &meta_input)
}
