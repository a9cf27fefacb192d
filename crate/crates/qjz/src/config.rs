//! Experiment configuration: TOML with explicit units in key names, strict
//! about unknown keys (a silent typo would corrupt physics parameters), and
//! overridable through `QJZ_*` environment variables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::DetectionModel;

/// Environment variable prefix for overrides, e.g. `QJZ_SEED=7`.
pub const ENV_PREFIX: &str = "QJZ_";

fn default_nu_hz() -> f64 {
    20_000.0
}
fn default_omega_x_hz() -> f64 {
    3.1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapConfig {
    pub nu_hz: f64,
    /// Radial trap frequency; informational only.
    pub omega_x_hz: f64,
}

impl Default for TrapConfig {
    fn default() -> Self {
        Self {
            nu_hz: default_nu_hz(),
            omega_x_hz: default_omega_x_hz(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveConfig {
    /// Dimensionless shift of the trap center, in zero-point units.
    pub d: f64,
    pub tau_us: Vec<f64>,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            d: 0.9317,
            tau_us: vec![5.0, 25.0, 45.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalConfig {
    pub nbar_list: Vec<f64>,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        Self {
            nbar_list: vec![0.051, 0.094, 0.157],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationConfig {
    pub n_trunc: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { n_trunc: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub shots: u64,
    pub seed: u64,
    pub bootstrap_b: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            shots: 5_000,
            seed: 0,
            bootstrap_b: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionConfig {
    pub eps_dark: f64,
    pub eps_bright: f64,
    pub subtraction_error: f64,
    pub heating_rate_quanta_per_ms: f64,
    pub iteration_time_ms: f64,
    pub max_iterations: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            eps_dark: 0.01,
            eps_bright: 0.01,
            subtraction_error: 0.0,
            heating_rate_quanta_per_ms: 0.0,
            iteration_time_ms: 0.1,
            max_iterations: 7,
        }
    }
}

impl DetectionConfig {
    pub fn model(&self) -> DetectionModel {
        DetectionModel {
            eps_dark: self.eps_dark,
            eps_bright: self.eps_bright,
            subtraction_error: self.subtraction_error,
            heating_rate_quanta_per_ms: self.heating_rate_quanta_per_ms,
            iteration_time_ms: self.iteration_time_ms,
            max_iterations: self.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatingConfig {
    pub rate_quanta_per_ms: f64,
    /// Thermal-occupation increase picked up on the return trip to the
    /// measurement zone.
    pub return_delta_nbar: f64,
}

impl Default for HeatingConfig {
    fn default() -> Self {
        Self {
            rate_quanta_per_ms: 0.157,
            return_delta_nbar: 0.015,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MleConfig {
    pub n_support: usize,
    pub starts: usize,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            n_support: 7,
            starts: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub trap: TrapConfig,
    pub drive: DriveConfig,
    pub thermal: ThermalConfig,
    pub truncation: TruncationConfig,
    pub sampling: SamplingConfig,
    pub detection: DetectionConfig,
    pub heating: HeatingConfig,
    pub mle: MleConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.trap.nu_hz > 0.0) {
            return Err(Error::Config("trap.nu_hz must be positive".into()));
        }
        if self.drive.tau_us.is_empty() || self.drive.tau_us.iter().any(|&t| t <= 0.0) {
            return Err(Error::Config("drive.tau_us must be positive".into()));
        }
        if self.thermal.nbar_list.is_empty() || self.thermal.nbar_list.iter().any(|&n| n < 0.0) {
            return Err(Error::Config("thermal.nbar_list must be nonnegative".into()));
        }
        if self.truncation.n_trunc < 16 {
            return Err(Error::Config("truncation.n_trunc must be >= 16".into()));
        }
        if self.mle.n_support < 2 || self.mle.starts < 2 {
            return Err(Error::Config("mle.n_support >= 2 and mle.starts >= 2".into()));
        }
        Ok(())
    }

    /// Apply `QJZ_*` environment overrides for the scalar knobs most often
    /// varied between runs.
    pub fn apply_env_overrides(&mut self) -> Result<()> {
        fn get<T: std::str::FromStr>(key: &str) -> Result<Option<T>>
        where
            T::Err: std::fmt::Display,
        {
            match std::env::var(format!("{ENV_PREFIX}{key}")) {
                Ok(v) => v
                    .parse::<T>()
                    .map(Some)
                    .map_err(|e| Error::Config(format!("{ENV_PREFIX}{key}: {e}"))),
                Err(_) => Ok(None),
            }
        }
        if let Some(v) = get::<u64>("SEED")? {
            self.sampling.seed = v;
        }
        if let Some(v) = get::<u64>("SHOTS")? {
            self.sampling.shots = v;
        }
        if let Some(v) = get::<usize>("BOOTSTRAP_B")? {
            self.sampling.bootstrap_b = v;
        }
        if let Some(v) = get::<usize>("N_TRUNC")? {
            self.truncation.n_trunc = v;
        }
        if let Some(v) = get::<f64>("D")? {
            self.drive.d = v;
        }
        if let Some(v) = get::<f64>("NU_HZ")? {
            self.trap.nu_hz = v;
        }
        self.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_nine_cell_grid() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.thermal.nbar_list.len() * cfg.drive.tau_us.len(), 9);
        assert_eq!(cfg.trap.nu_hz, 20_000.0);
        assert_eq!(cfg.truncation.n_trunc, 128);
    }

    #[test]
    fn toml_round_trip_is_identical() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_hard_errors() {
        let err = ExperimentConfig::from_toml_str("[trap]\nnu_khz = 20.0\n");
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn partial_files_use_defaults() {
        let cfg = ExperimentConfig::from_toml_str("[drive]\nd = 0.5\n").unwrap();
        assert_eq!(cfg.drive.d, 0.5);
        assert_eq!(cfg.trap.nu_hz, 20_000.0);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_toml_str("[trap]\nnu_hz = -1.0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[truncation]\nn_trunc = 4\n").is_err());
    }
}
