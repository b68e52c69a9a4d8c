use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algos::{AlgoConfig, AlgoKey};
use crate::envs::{EnvConfig, Environment};
use crate::error::{Error, Result};
use crate::policy::{ActionSpec, Arch, Network, PolicyInit, PolicyParams};
use crate::quantile::StepSchedule;

pub const SCHEMA_VERSION: u32 = 1;

/// Post-training evaluation size.
pub const EVAL_EPISODES: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkConfig {
    Mlp {
        hidden: Vec<usize>,
    },
    /// Convolution over the observation's time axis; needs a `[time, channels]`
    /// observation.
    TemporalConv {
        channels: Vec<usize>,
        kernel_size: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub network: NetworkConfig,
    #[serde(default = "default_head_scale")]
    pub head_scale: f64,
    #[serde(default = "default_init_log_std")]
    pub init_log_std: f64,
}

fn default_head_scale() -> f64 {
    PolicyInit::default().head_scale
}

fn default_init_log_std() -> f64 {
    PolicyInit::default().init_log_std
}

impl PolicyConfig {
    pub fn mlp(hidden: &[usize]) -> Self {
        Self {
            network: NetworkConfig::Mlp { hidden: hidden.to_vec() },
            head_scale: default_head_scale(),
            init_log_std: default_init_log_std(),
        }
    }

    pub fn temporal_conv(channels: &[usize], kernel_size: usize) -> Self {
        Self {
            network: NetworkConfig::TemporalConv { channels: channels.to_vec(), kernel_size },
            head_scale: default_head_scale(),
            init_log_std: default_init_log_std(),
        }
    }

    pub fn init(&self) -> PolicyInit {
        PolicyInit { head_scale: self.head_scale, init_log_std: self.init_log_std }
    }

    pub fn arch(&self, observation_shape: &[usize], spec: ActionSpec) -> Result<Arch> {
        let width = spec.logits_width();
        let arch = match &self.network {
            NetworkConfig::Mlp { hidden } => Arch::mlp(observation_shape.iter().product(), hidden, width),
            NetworkConfig::TemporalConv { channels, kernel_size } => {
                let &[time, features] = observation_shape else {
                    return Err(Error::config(format!(
                        "temporal convolution needs a [time, channels] observation, got {observation_shape:?}"
                    )));
                };
                if *kernel_size == 0 || channels.is_empty() {
                    return Err(Error::config("temporal convolution needs a positive kernel and at least one layer"));
                }
                let (heads, outputs) = match spec {
                    ActionSpec::MultiDiscrete { n, groups } => (groups, n),
                    other => (1, other.logits_width()),
                };
                Arch::temporal_conv(time, features, channels, *kernel_size, heads, outputs)
            }
        };
        Ok(match spec {
            ActionSpec::Simplex { n } => arch.with_log_std(n),
            _ => arch,
        })
    }
}

/// Fresh policy for `env`, drawn from `rng`.
pub fn build_policy(env: &dyn Environment, cfg: &PolicyConfig, rng: &mut impl Rng) -> Result<PolicyParams> {
    let spec = env.action_spec();
    let network = Network::new(cfg.arch(&env.observation_shape(), spec)?)?;
    PolicyParams::init(network, spec, cfg.init(), rng)
}

/// One experiment: environment, algorithm, policy architecture and protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub env: EnvConfig,
    pub algo: AlgoConfig,
    pub policy: PolicyConfig,
    /// Training episodes per replication.
    pub episodes: u64,
    pub replications: usize,
    /// Base seed; replication `i` derives its streams from `(seed, i)`.
    pub seed: u64,
    /// Rolling window for the metrics file.
    pub window: usize,
    pub eval_episodes: usize,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!("schema version {} unsupported (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        let horizon = self.env.horizon();
        self.algo.validate(horizon)?;
        if self.window == 0 {
            return Err(Error::config("rolling window must be at least 1"));
        }
        if self.replications == 0 {
            return Err(Error::config("at least one replication is required"));
        }
        let env = self.env.build()?;
        let mut rng = crate::seeds::stream_rng(self.seed, crate::seeds::Stream::Init, 0);
        build_policy(env.as_ref(), &self.policy, &mut rng)?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }

    /// Named experiment with the published hyperparameters for `env`.
    ///
    /// Known names: `zero_mean_simple`, `zero_mean_hard`, `portfolio_hedgeable`,
    /// `portfolio_imperfect`, `inventory_uniform`, `inventory_merton`,
    /// `inventory_saw`, `inventory_multi`, plus the reduced-cost
    /// `portfolio_desk` and `inventory_desk`.
    pub fn preset(name: &str, algo: AlgoKey) -> Result<Self> {
        let (env, mut algo_cfg, policy, episodes, window) = match name {
            "zero_mean_simple" => (EnvConfig::preset(name)?, AlgoConfig::default(), PolicyConfig::mlp(&[8, 8]), 5_000, 100),
            "zero_mean_hard" => {
                let a = AlgoConfig {
                    policy_lr: StepSchedule::Staircase { initial: 5e-4, factor: 0.8, interval: 2500 },
                    quantile_lr: StepSchedule::quantile_companion(1e-3, 0.8, 2500),
                    baseline_hidden: vec![64, 64, 64],
                    ..AlgoConfig::default()
                };
                (EnvConfig::preset(name)?, a, PolicyConfig::mlp(&[64, 64, 64]), 5_000, 100)
            }
            "portfolio_hedgeable" | "portfolio_imperfect" => {
                (EnvConfig::preset(name)?, portfolio_algo(), PolicyConfig::mlp(&[64, 64, 64]), 100_000, 200)
            }
            "inventory_uniform" | "inventory_merton" | "inventory_saw" => {
                (EnvConfig::preset(name)?, single_echelon_algo(), PolicyConfig::temporal_conv(&[64], 3), 50_000, 100)
            }
            "inventory_multi" => {
                let a = AlgoConfig {
                    policy_lr: StepSchedule::Staircase { initial: 1e-4, factor: 0.9, interval: 20_000 },
                    quantile_lr: StepSchedule::quantile_companion(0.2, 0.9, 20_000),
                    update_interval: 10_000,
                    truncation: 91,
                    ..single_echelon_algo()
                };
                (EnvConfig::preset(name)?, a, PolicyConfig::temporal_conv(&[32, 64], 3), 100_000, 100)
            }
            "portfolio_desk" => {
                let a = AlgoConfig {
                    policy_lr: StepSchedule::Staircase { initial: 3e-4, factor: 0.9, interval: 5_000 },
                    quantile_lr: StepSchedule::quantile_companion(0.01, 0.9, 5_000),
                    update_interval: 2_000,
                    truncation: 100,
                    baseline_hidden: vec![16, 16],
                    ..portfolio_algo()
                };
                (EnvConfig::preset("portfolio_hedgeable")?, a, PolicyConfig::mlp(&[16, 16]), 20_000, 200)
            }
            "inventory_desk" => {
                let a = AlgoConfig {
                    policy_lr: StepSchedule::Staircase { initial: 1e-3, factor: 0.9, interval: 2_500 },
                    quantile_lr: StepSchedule::quantile_companion(2.0, 0.9, 2_500),
                    baseline_hidden: vec![16, 16],
                    ..single_echelon_algo()
                };
                (EnvConfig::preset("inventory_uniform")?, a, PolicyConfig::temporal_conv(&[16], 3), 10_000, 100)
            }
            other => return Err(Error::config(format!("unknown experiment preset {other:?}"))),
        };
        algo_cfg.algo = algo;
        let cfg = Self {
            schema_version: SCHEMA_VERSION,
            name: format!("{name}_{}", algo.name()),
            env,
            algo: algo_cfg,
            policy,
            episodes,
            replications: 5,
            seed: 0,
            window,
            eval_episodes: EVAL_EPISODES,
            out_dir: PathBuf::from("runs").join(format!("{name}_{}", algo.name())),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn portfolio_algo() -> AlgoConfig {
    AlgoConfig {
        alpha: 0.1,
        policy_lr: StepSchedule::Staircase { initial: 2e-5, factor: 0.9, interval: 10_000 },
        quantile_lr: StepSchedule::quantile_companion(0.01, 0.9, 10_000),
        update_interval: 5_000,
        truncation: 91,
        baseline_hidden: vec![64, 64, 64],
        ..AlgoConfig::default()
    }
}

fn single_echelon_algo() -> AlgoConfig {
    AlgoConfig {
        alpha: 0.1,
        policy_lr: StepSchedule::Staircase { initial: 1e-4, factor: 0.9, interval: 5_000 },
        quantile_lr: StepSchedule::quantile_companion(2.0, 0.9, 5_000),
        update_interval: 2_000,
        truncation: 46,
        baseline_hidden: vec![64],
        ..AlgoConfig::default()
    }
}

pub const PRESETS: [&str; 10] = [
    "zero_mean_simple",
    "zero_mean_hard",
    "portfolio_hedgeable",
    "portfolio_imperfect",
    "inventory_uniform",
    "inventory_merton",
    "inventory_saw",
    "inventory_multi",
    "portfolio_desk",
    "inventory_desk",
];
