//! Versioned JSON model persistence.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::{predict_boost, predict_forest, BoostModel, ForestModel};
use crate::error::{Error, Result};
use crate::linear::{predict_linear, LinearModel};
use crate::stack::{predict_stack, StackModel};

pub const MODEL_FORMAT: &str = "clv-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum ModelKind {
    RandomForest(ForestModel),
    Boost(BoostModel),
    ElasticNet(LinearModel),
    Stack(StackModel),
}

impl ModelKind {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            ModelKind::RandomForest(m) => predict_forest(m, x),
            ModelKind::Boost(m) => predict_boost(m, x),
            ModelKind::ElasticNet(m) => predict_linear(m, x),
            ModelKind::Stack(m) => predict_stack(m, x),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelKind::RandomForest(_) => "random_forest",
            ModelKind::Boost(_) => "boost",
            ModelKind::ElasticNet(_) => "elastic_net",
            ModelKind::Stack(_) => "stack",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    #[serde(flatten)]
    pub model: ModelKind,
}

impl ModelFile {
    pub fn new(model: ModelKind) -> ModelFile {
        ModelFile { format: MODEL_FORMAT.into(), model }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelFile> {
        let text = fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::InvalidInput(format!(
                "unsupported model format {:?}, expected {MODEL_FORMAT:?}",
                file.format
            )));
        }
        Ok(file)
    }
}
