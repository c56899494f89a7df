//! Declarative TOML run configuration. Every field is optional; command
//! flags override file values and built-in defaults fill the rest.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use osmp::training::LossWeights;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub encoder: EncoderSection,
    #[serde(default)]
    pub hopf: HopfSection,
    #[serde(default)]
    pub train: TrainSection,
    /// Loss weights; missing keys take the library defaults.
    pub weights: Option<LossWeights>,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub rollout: RolloutSection,
    #[serde(default)]
    pub sync: SyncSection,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub kind: Option<String>,
    pub samples: Option<usize>,
    pub period: Option<f64>,
    pub noise: Option<f64>,
    pub raw: Option<bool>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSection {
    pub blocks: Option<usize>,
    pub hidden: Option<usize>,
    pub clamp_bound: Option<f64>,
    pub length_scale: Option<f64>,
    pub fourier_scale: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopfSection {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub radius: Option<f64>,
    /// Constant angular velocity; defaults to `2π / period`.
    pub omega: Option<f64>,
    pub learned_omega: Option<bool>,
    pub omega_hidden: Option<Vec<usize>>,
    pub learned_speed: Option<bool>,
    pub speed_hidden: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub data: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub warmup_epochs: Option<usize>,
    pub decay_start_fraction: Option<f64>,
    pub weight_decay: Option<f64>,
    pub resume: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub seeds: Option<Vec<u64>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutSection {
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub s_f: Option<f64>,
    pub s_omega: Option<f64>,
    pub k_conv: Option<f64>,
    pub x_o: Option<Vec<f64>>,
    pub r_sm: Option<f64>,
    pub sigma_sm: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyncSection {
    pub k_ps: Option<f64>,
    /// Desired offsets δΦ* in radians, row-major `n_s × n_s`.
    pub offsets: Option<Vec<Vec<f64>>>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
