//! Config files, command-line overrides and the resolved-config contract.
//!
//! Configs are TOML with three optional sections — `[params]`, `[scenario]`,
//! `[joint]` — plus an optional explicit `[[devices]]` list. Every field has
//! a default, command-line flags override file values, and the fully
//! resolved config serializes back to TOML so a run can be reproduced from
//! its own output.

use crate::CliError;
use feel_rrm::joint::{InitMode, JointConfig};
use feel_rrm::model::{Device, SystemParams};
use feel_rrm::sim::{ScenarioConfig, DEFAULT_TRADEOFF};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub joint: JointSection,
    /// Explicit population; when present it replaces generated devices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub devices: Option<Vec<DeviceSpec>>,
}

/// Mirror of [`SystemParams`] (SI units throughout).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub bandwidth: f64,
    pub noise: f64,
    pub model_size: f64,
    pub round_time: f64,
    pub tradeoff: f64,
    pub compute_energy: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        let p = SystemParams::default();
        Self {
            bandwidth: p.bandwidth,
            noise: p.noise,
            model_size: p.model_size,
            round_time: p.round_time,
            tradeoff: DEFAULT_TRADEOFF,
            compute_energy: p.compute_energy,
        }
    }
}

impl ParamsSection {
    pub fn to_params(&self) -> SystemParams {
        SystemParams {
            bandwidth: self.bandwidth,
            noise: self.noise,
            model_size: self.model_size,
            round_time: self.round_time,
            tradeoff: self.tradeoff,
            compute_energy: self.compute_energy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub num_devices: usize,
    pub path_loss: f64,
    pub compute_time_range: (f64, f64),
    pub t_sweep: Vec<f64>,
    pub trials: usize,
    pub rng_seed: u64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let s = ScenarioConfig::default();
        Self {
            num_devices: s.num_devices,
            path_loss: s.path_loss,
            compute_time_range: s.compute_time_range,
            t_sweep: s.t_sweep,
            trials: s.trials,
            rng_seed: s.rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JointSection {
    pub max_iters: usize,
    pub convergence_tol: f64,
    pub rounding_threshold: f64,
    pub init_mode: InitMode,
    pub rng_seed: u64,
    pub record_trajectory: bool,
}

impl Default for JointSection {
    fn default() -> Self {
        let j = JointConfig::default();
        Self {
            max_iters: j.max_iters,
            convergence_tol: j.convergence_tol,
            rounding_threshold: j.rounding_threshold,
            init_mode: j.init_mode,
            rng_seed: j.rng_seed,
            record_trajectory: j.record_trajectory,
        }
    }
}

impl JointSection {
    pub fn to_config(&self) -> JointConfig {
        JointConfig {
            max_iters: self.max_iters,
            convergence_tol: self.convergence_tol,
            rounding_threshold: self.rounding_threshold,
            init_mode: self.init_mode,
            rng_seed: self.rng_seed,
            record_trajectory: self.record_trajectory,
        }
    }
}

/// One explicit device. Exactly one of `channel_gain` (amplitude) or
/// `power_gain` (`h^2`) must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_gain: Option<f64>,
    pub compute_time: f64,
}

impl DeviceSpec {
    fn to_device(&self, index: usize) -> Result<Device, CliError> {
        let id = self.id.unwrap_or(index);
        let device = match (self.channel_gain, self.power_gain) {
            (Some(gain), None) => Device::new(id, gain, self.compute_time),
            (None, Some(power)) => Device::from_power_gain(id, power, self.compute_time),
            _ => {
                return Err(CliError::Config(format!(
                    "device entry {index}: give exactly one of channel_gain or power_gain"
                )))
            }
        };
        device.map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Overrides taken from the command line; `None` keeps the file value.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub lambda: Option<f64>,
    pub trials: Option<usize>,
}

/// A config after file parsing, overrides and validation.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub file: FileConfig,
    pub params: SystemParams,
    pub scenario: ScenarioConfig,
    pub joint: JointConfig,
    pub devices: Option<Vec<Device>>,
}

impl Resolved {
    /// Canonical TOML of the resolved config; re-ingesting it reproduces the
    /// run exactly.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.file).expect("resolved config serializes")
    }

    /// FNV-1a hash of the canonical TOML, as a hex string.
    pub fn digest(&self) -> String {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in self.to_toml().as_bytes() {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{hash:016x}")
    }

    /// Explicit devices if configured, otherwise the seeded population of
    /// the given trial.
    pub fn population(&self, trial: usize) -> Vec<Device> {
        match &self.devices {
            Some(devices) => devices.clone(),
            None => feel_rrm::sim::generate_population(&self.scenario, trial),
        }
    }
}

pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Resolved, CliError> {
    let mut file: FileConfig = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", p.display()))
            })?;
            toml::from_str(&text).map_err(|e| {
                CliError::Config(format!("cannot parse config {}: {e}", p.display()))
            })?
        }
        None => FileConfig::default(),
    };

    if let Some(seed) = overrides.seed {
        file.scenario.rng_seed = seed;
    }
    if let Some(lambda) = overrides.lambda {
        file.params.tradeoff = lambda;
    }
    if let Some(trials) = overrides.trials {
        file.scenario.trials = trials;
    }

    let params = file.params.to_params();
    let scenario = ScenarioConfig {
        num_devices: file.scenario.num_devices,
        path_loss: file.scenario.path_loss,
        compute_time_range: file.scenario.compute_time_range,
        params,
        t_sweep: file.scenario.t_sweep.clone(),
        trials: file.scenario.trials,
        rng_seed: file.scenario.rng_seed,
    };
    scenario
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let joint = file.joint.to_config();
    joint
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let devices = match &file.devices {
        Some(specs) => {
            if specs.is_empty() {
                return Err(CliError::Config("explicit device list is empty".into()));
            }
            Some(
                specs
                    .iter()
                    .enumerate()
                    .map(|(i, s)| s.to_device(i))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        }
        None => None,
    };

    Ok(Resolved {
        file,
        params,
        scenario,
        joint,
        devices,
    })
}
