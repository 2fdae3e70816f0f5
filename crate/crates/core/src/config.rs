//! Flat key-value (TOML) scenario files. Exactly one of `cp_rate` /
//! `cp_fraction` must be present; unknown keys are rejected by name.
//!
//! ```toml
//! horizon = 10
//! ramp_delta = 0.3
//! x_min = 0.0
//! x_max = 1.0
//! cp_fraction = 0.6
//! revenue = "quartic_root"
//! load = "gaussian"
//! load_mean = 0.0
//! load_std = 1.0
//! rng_seed = 42
//! ```

use crate::domain::{CpCharge, LoadModel, RevenueFunction, ScenarioConfig, ScenarioParams};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// On-disk form of a scenario. All scalars are `f64`, the precision every
/// file format of this crate is written in.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub horizon: u32,
    pub ramp_delta: f64,
    pub x_min: f64,
    pub x_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cp_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cp_fraction: Option<f64>,
    /// `"log_quadratic"`, `"quartic_root"`, or `"custom"`.
    pub revenue: String,
    /// Polynomial coefficients, required when `revenue = "custom"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revenue_coeffs: Option<Vec<f64>>,
    /// `"gaussian"` or `"uniform"`.
    pub load: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load_high: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_x: Option<f64>,
    #[serde(default = "default_seed")]
    pub rng_seed: u64,
}

fn default_seed() -> u64 {
    42
}

impl RawConfig {
    pub fn into_config(self) -> Result<ScenarioConfig<f64>> {
        let cp_charge = match (self.cp_rate, self.cp_fraction) {
            (Some(rate), None) => CpCharge::Rate(rate),
            (None, Some(frac)) => CpCharge::Fraction(frac),
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "cp_rate and cp_fraction are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(Error::InvalidConfig(
                    "one of cp_rate or cp_fraction is required".into(),
                ))
            }
        };

        let revenue = match self.revenue.as_str() {
            "log_quadratic" => RevenueFunction::LogQuadratic,
            "quartic_root" => RevenueFunction::QuarticRoot,
            "custom" => {
                let coeffs = self.revenue_coeffs.clone().ok_or_else(|| {
                    Error::InvalidConfig("revenue = \"custom\" requires revenue_coeffs".into())
                })?;
                RevenueFunction::Custom { coeffs }
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown revenue kind {other:?}; expected \
                     \"log_quadratic\", \"quartic_root\", or \"custom\""
                )))
            }
        };
        if !matches!(revenue, RevenueFunction::Custom { .. }) && self.revenue_coeffs.is_some() {
            return Err(Error::InvalidConfig(
                "revenue_coeffs is only meaningful with revenue = \"custom\"".into(),
            ));
        }

        let load = match self.load.as_str() {
            "gaussian" => {
                if self.load_low.is_some() || self.load_high.is_some() {
                    return Err(Error::InvalidConfig(
                        "load_low/load_high do not apply to a gaussian load".into(),
                    ));
                }
                LoadModel::gaussian(
                    self.load_mean.unwrap_or(0.0),
                    self.load_std.unwrap_or(1.0),
                )?
            }
            "uniform" => {
                if self.load_mean.is_some() || self.load_std.is_some() {
                    return Err(Error::InvalidConfig(
                        "load_mean/load_std do not apply to a uniform load".into(),
                    ));
                }
                let low = self.load_low.ok_or_else(|| {
                    Error::InvalidConfig("uniform load requires load_low".into())
                })?;
                let high = self.load_high.ok_or_else(|| {
                    Error::InvalidConfig("uniform load requires load_high".into())
                })?;
                LoadModel::uniform(low, high)?
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown load kind {other:?}; expected \"gaussian\" or \"uniform\""
                )))
            }
        };

        ScenarioConfig::new(ScenarioParams {
            horizon: self.horizon,
            ramp_delta: self.ramp_delta,
            x_min: self.x_min,
            x_max: self.x_max,
            cp_charge,
            revenue,
            load,
            initial_x: self.initial_x,
            rng_seed: self.rng_seed,
        })
    }

    pub fn from_config(cfg: &ScenarioConfig<f64>) -> Self {
        let (revenue, revenue_coeffs) = match &cfg.revenue {
            RevenueFunction::LogQuadratic => ("log_quadratic".to_string(), None),
            RevenueFunction::QuarticRoot => ("quartic_root".to_string(), None),
            RevenueFunction::Custom { coeffs } => ("custom".to_string(), Some(coeffs.clone())),
        };
        let (load, load_mean, load_std, load_low, load_high) = match cfg.load {
            LoadModel::Gaussian { mean, std_dev } => {
                ("gaussian".to_string(), Some(mean), Some(std_dev), None, None)
            }
            LoadModel::Uniform { low, high } => {
                ("uniform".to_string(), None, None, Some(low), Some(high))
            }
        };
        let (cp_rate, cp_fraction) = match cfg.cp_fraction {
            Some(f) => (None, Some(f)),
            None => (Some(cfg.cp_rate), None),
        };
        Self {
            horizon: cfg.horizon,
            ramp_delta: cfg.ramp_delta,
            x_min: cfg.x_min,
            x_max: cfg.x_max,
            cp_rate,
            cp_fraction,
            revenue,
            revenue_coeffs,
            load,
            load_mean,
            load_std,
            load_low,
            load_high,
            initial_x: cfg.initial_x,
            rng_seed: cfg.rng_seed,
        }
    }
}

/// Parse a scenario from TOML text.
pub fn parse_config(text: &str) -> Result<ScenarioConfig<f64>> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
    raw.into_config()
}

/// Load a scenario from a TOML file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig<f64>> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_config(&text)
}

/// Serialize a scenario back to flat TOML.
pub fn config_to_toml(cfg: &ScenarioConfig<f64>) -> String {
    toml::to_string(&RawConfig::from_config(cfg)).expect("config serializes")
}
