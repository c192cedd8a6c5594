//! JSON configuration ingestion. Unknown keys are a hard error everywhere.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelParams, ValidatedParams, ValidationErrors};
use crate::reinit::ReinitSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config {path} is not valid: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Invalid(#[from] ValidationErrors),
}

/// Top-level simulation configuration.
///
/// ```json
/// {
///   "model": {
///     "n": 10000,
///     "horizon_t": 1.0,
///     "tick_delta": 0.1,
///     "kappa_minus": 0.5,
///     "kappa_plus": 0.5,
///     "flow": {
///       "event_probs": [0.25, 0.25, 0.25, 0.25],
///       "market_prob": [0.55, 0.55, 0.55, 0.55]
///     },
///     "dependence_order": 0,
///     "regime_overrides": null
///   },
///   "reinit": {
///     "phi": "identity",
///     "plus": { "uniform_steps": { "lo": 10, "hi": 20 } },
///     "minus": { "uniform_steps": { "lo": 10, "hi": 20 } },
///     "alpha_floor": 1.0
///   },
///   "initial_queues": [12, 15, 9, 14]
/// }
/// ```
///
/// Queue vectors follow the component order `(bid F, ask F, bid G, ask G)`;
/// `initial_queues` is in `dv` units and defaults to a draw from the
/// up-move reinitialization law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub reinit: ReinitSpec,
    #[serde(default)]
    pub initial_queues: Option<[i64; 4]>,
}

impl SimulationConfig {
    pub fn from_path(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    pub fn from_json(text: &str, path: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.into(),
            source,
        })
    }

    pub fn validate(&self) -> Result<ValidatedParams, ConfigError> {
        self.reinit
            .validate()
            .map_err(|msg| ConfigError::Invalid(ValidationErrors(vec![
                crate::model::ModelError::ProbabilitiesInvalid(format!("reinit: {msg}")),
            ])))?;
        Ok(crate::model::validate_params(&self.model)?)
    }
}

/// Configuration of the table experiment (price-change counts and ranges).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TablesConfig {
    pub n: u32,
    pub replications: usize,
    #[serde(default)]
    pub reinit: ReinitSpec,
}

impl Default for TablesConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            replications: 1_000,
            reinit: ReinitSpec::default(),
        }
    }
}

impl TablesConfig {
    pub fn from_path(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.into(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_unknown_key_rejection() {
        let cfg = SimulationConfig {
            model: ModelParams::balanced(10_000, 1.0, 5.0),
            reinit: ReinitSpec::default(),
            initial_queues: Some([12, 15, 9, 14]),
        };
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = SimulationConfig::from_json(&text, "<mem>").unwrap();
        assert_eq!(cfg, back);

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["model"]["typo_key"] = 1.into();
        let bad = serde_json::to_string(&v).unwrap();
        assert!(SimulationConfig::from_json(&bad, "<mem>").is_err());
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            SimulationConfig::from_path("/nonexistent/cfg.json"),
            Err(ConfigError::Io { .. })
        ));
    }
}
