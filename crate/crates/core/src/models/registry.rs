//! Name-keyed construction of forward models from structured config values.

use super::blackbox::BlackBoxModel;
use super::burgers::{BurgersModel, BurgersRiemannConfig};
use super::co2::{Co2Model, Co2ModelConfig};
use super::ForwardModel;
use crate::error::{Error, Result};

/// Build a model from its registry name and a JSON options object.
/// Recognized names: `burgers`, `burgers-indicator`, `co2`, `blackbox`.
pub fn build_model(name: &str, options: &serde_json::Value) -> Result<Box<dyn ForwardModel>> {
    match name {
        "burgers" => {
            let cfg: BurgersRiemannConfig = parse_options(options)?;
            Ok(Box::new(BurgersModel::new(cfg)))
        }
        "burgers-indicator" => {
            let cfg: BurgersRiemannConfig = parse_options(options)?;
            Ok(Box::new(BurgersIndicatorModel { config: cfg }))
        }
        "co2" => {
            let cfg: Co2ModelConfig = parse_options(options)?;
            Ok(Box::new(Co2Model::new(cfg)))
        }
        "blackbox" => {
            let command = options
                .get("command")
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::InvalidArgument("blackbox needs a 'command' string".into()))?;
            let dim = options
                .get("dim")
                .and_then(|v| v.as_u64())
                .ok_or_else(|| Error::InvalidArgument("blackbox needs an integer 'dim'".into()))?;
            Ok(Box::new(BlackBoxModel::new(command, dim as usize)?))
        }
        other => Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
    }
}

fn parse_options<T: serde::de::DeserializeOwned>(options: &serde_json::Value) -> Result<T> {
    serde_json::from_value(options.clone())
        .map_err(|e| Error::InvalidArgument(format!("bad model options: {e}")))
}

/// Smooth signed indicator of the Burgers shock location; its zero set is
/// exactly the QI discontinuity and it is cheap to evaluate, which makes it
/// a convenient exact reference for the front tracker.
#[derive(Debug, Clone, Default)]
pub struct BurgersIndicatorModel {
    pub config: BurgersRiemannConfig,
}

impl ForwardModel for BurgersIndicatorModel {
    fn name(&self) -> &str {
        "burgers-indicator"
    }

    fn dim(&self) -> usize {
        2
    }

    fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        super::burgers::burgers_discontinuity_indicator(&self.config, xi)
    }

    fn is_exact(&self) -> bool {
        true
    }
}
