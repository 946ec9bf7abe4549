use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::PpoConfig;

use super::SamplerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutConfig {
    /// Complete episodes collected per iteration, at least.
    pub episodes: usize,
    /// Frames collected per iteration, at least.
    pub batch_size: usize,
    pub gamma: f64,
    pub lambda: f64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            episodes: 4,
            batch_size: 128,
            gamma: 0.99,
            lambda: 0.95,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardModelConfig {
    /// Step size of the surrogate reward.
    pub alpha: f64,
    /// Weight of the squared-error term against the adversarial term.
    pub kl_weight: f64,
    /// Noise draws per trajectory.
    pub noise_draws: usize,
}

impl Default for RewardModelConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            kl_weight: 1.0,
            noise_draws: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Maximum number of iterations.
    pub iterations: usize,
    /// Stop once this many frames have been used; 0 means no limit.
    pub max_frames: usize,
    pub seed: u64,
    pub target_return: f64,
    /// Episodes in the rolling return average.
    pub return_window: usize,
    /// End training as soon as the rolling return reaches the target.
    pub stop_at_target: bool,
    /// Surrogate-reward and sampler updates per batch of episodes.
    pub inner_steps: usize,
    pub rollout: RolloutConfig,
    pub ppo: PpoConfig,
    pub sampler: SamplerConfig,
    pub reward_model: RewardModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            max_frames: 1_000_000,
            seed: 0,
            target_return: 0.8,
            return_window: 50,
            stop_at_target: false,
            inner_steps: 4,
            rollout: RolloutConfig::default(),
            ppo: PpoConfig::default(),
            sampler: SamplerConfig::default(),
            reward_model: RewardModelConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Step sizes from the original network setup. They are far too small
    /// for the tabular learners here and are kept for reference.
    pub fn reference() -> Self {
        let mut c = Self::default();
        c.reward_model.alpha = 0.001;
        c.sampler.beta = 0.0003;
        c.sampler.eta = 1e8;
        c.sampler.k = 16;
        c.inner_steps = 1;
        c
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let c: Self = toml::from_str(s)?;
        c.check()?;
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let s = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.sampler.k == 0 {
            return bad("sampler.k must be at least 1");
        }
        if self.reward_model.noise_draws == 0 {
            return bad("reward_model.noise_draws must be at least 1");
        }
        if self.inner_steps == 0 {
            return bad("inner_steps must be at least 1");
        }
        if self.rollout.episodes == 0 {
            return bad("rollout.episodes must be at least 1");
        }
        if self.return_window == 0 {
            return bad("return_window must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.rollout.gamma) || !(0.0..=1.0).contains(&self.rollout.lambda)
        {
            return bad("rollout.gamma and rollout.lambda must lie in [0, 1]");
        }
        Ok(())
    }
}
