//! Training configuration file schema.
//!
//! A config trains either one named learner or a stack:
//!
//! ```json
//! {"seed": 42, "learner": {"name": "rf", "type": "random_forest", "params": {}}}
//! ```
//!
//! ```json
//! {"seed": 42, "stack": {
//!     "base_specs": [
//!         {"name": "rf", "type": "random_forest", "params": {"n_estimators": 200}},
//!         {"name": "gb", "type": "boost", "params": {"n_estimators": 10, "learning_rate": 0.3}},
//!         {"name": "lin", "type": "elastic_net", "params": {}}
//!     ],
//!     "meta_params": {"penalty_strength": 0.001, "l1_ratio": 0.5},
//!     "k_folds": 5,
//!     "use_features_in_secondary": true
//! }}
//! ```

use serde::{Deserialize, Serialize};

use clvkit_core::linear::ElasticNetParams;
use clvkit_core::stack::{LearnerSpec, StackParams};

fn default_seed() -> u64 {
    42
}

fn default_k_folds() -> usize {
    5
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(flatten)]
    pub mode: TrainMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Learner(LearnerSpec),
    Stack(StackConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StackConfig {
    pub base_specs: Vec<LearnerSpec>,
    #[serde(default)]
    pub meta_params: ElasticNetParams,
    #[serde(default = "default_k_folds")]
    pub k_folds: usize,
    #[serde(default = "default_true")]
    pub use_features_in_secondary: bool,
}

impl StackConfig {
    pub fn into_params(self, seed: u64) -> StackParams {
        StackParams {
            base_specs: self.base_specs,
            meta_params: self.meta_params,
            k_folds: self.k_folds,
            use_features_in_secondary: self.use_features_in_secondary,
            global_seed: seed,
        }
    }
}
