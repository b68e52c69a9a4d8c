//! Training algorithms: quantile-criterion QPO and QPPO, and the mean-based
//! REINFORCE and PPO plus a derivative-free SPSA reference.

mod estimators;
mod ppo;
mod qpo;
mod qppo;
mod reinforce;
mod rollout;
mod spsa;
pub mod toy;

use serde::{Deserialize, Serialize};

use crate::autodiff::AdamState;
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::policy::{project, PolicyParams, PARAM_BOUND};
use crate::quantile::{QuantileOptimizer, StepSchedule, WARM_START_EPISODES};
use crate::SimRng;

pub use estimators::{
    clip_aggregate, clipped_surrogate, descent_direction, descent_direction_prefix, direction_bound, importance_ratio, norm,
    ratio_from_log_probs, SurrogateTerm,
};
pub use ppo::PpoAgent;
pub use qpo::QpoAgent;
pub use qppo::QppoAgent;
pub use reinforce::ReinforceAgent;
pub use rollout::{rollout, Trajectory};
pub use spsa::{rademacher, spsa_gradient, SpsaAgent, SpsaGains};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgoKey {
    Qpo,
    Qppo,
    Reinforce,
    Ppo,
    Spsa,
}

impl AlgoKey {
    pub fn name(&self) -> &'static str {
        match self {
            AlgoKey::Qpo => "qpo",
            AlgoKey::Qppo => "qppo",
            AlgoKey::Reinforce => "reinforce",
            AlgoKey::Ppo => "ppo",
            AlgoKey::Spsa => "spsa",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    /// Plain projected stochastic approximation `θ ← φ(θ + γ_k d)`.
    Sgd,
}

/// Hyperparameters for every algorithm; each algorithm reads the fields it
/// needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgoConfig {
    pub algo: AlgoKey,
    pub alpha: f64,
    pub discount: f64,
    pub policy_lr: StepSchedule,
    pub optimizer: OptimizerKind,
    pub quantile_lr: StepSchedule,
    pub quantile_optimizer: QuantileOptimizer,
    pub warm_start_episodes: usize,
    /// Shortest truncated horizon used by QPPO.
    pub truncation: usize,
    pub clip: f64,
    /// Ascent steps taken on each truncated-horizon surrogate in QPPO.
    pub surrogate_steps: usize,
    /// Environment steps collected between PPO updates.
    pub update_interval: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub baseline_lr: f64,
    pub baseline_hidden: Vec<usize>,
    /// Magnitude the PPO value network predicts in units of.
    pub value_scale: f64,
    pub spsa: SpsaGains,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        Self {
            algo: AlgoKey::Qppo,
            alpha: 0.25,
            discount: 0.99,
            policy_lr: StepSchedule::Staircase { initial: 1e-3, factor: 0.8, interval: 2500 },
            optimizer: OptimizerKind::Adam,
            quantile_lr: StepSchedule::quantile_companion(0.01, 0.8, 2500),
            quantile_optimizer: QuantileOptimizer::Adam,
            warm_start_episodes: WARM_START_EPISODES,
            truncation: 16,
            clip: 0.2,
            surrogate_steps: 1,
            update_interval: 2000,
            epochs: 4,
            minibatch: 256,
            baseline_lr: 1e-3,
            baseline_hidden: vec![8, 8],
            value_scale: 1.0,
            spsa: SpsaGains::default(),
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::config(format!("discount {} outside (0, 1]", self.discount)));
        }
        self.policy_lr.validate()?;
        self.quantile_lr.validate()?;
        if self.truncation == 0 || self.truncation > horizon {
            return Err(Error::config(format!("truncation {} outside [1, {horizon}]", self.truncation)));
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::config(format!("clip {} outside (0, 1)", self.clip)));
        }
        if self.update_interval == 0
            || self.surrogate_steps == 0
            || self.epochs == 0
            || self.minibatch == 0
            || self.warm_start_episodes == 0
        {
            return Err(Error::config("update interval, surrogate steps, epochs, minibatch and warm start must be positive"));
        }
        if !(self.baseline_lr > 0.0 && self.value_scale > 0.0) {
            return Err(Error::config("baseline learning rate and value scale must be positive"));
        }
        self.spsa.validate()
    }
}

/// Named random streams owned by one training run.
#[derive(Clone, Debug)]
pub struct Streams {
    pub env: SimRng,
    pub policy: SimRng,
    /// Horizon shuffles, minibatch order and SPSA perturbations.
    pub shuffle: SimRng,
}

/// Per-episode record reported to the harness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub ret: f64,
    pub accuracy: Option<f64>,
}

impl EpisodeSummary {
    pub fn of(traj: &Trajectory) -> Self {
        Self { ret: traj.ret(), accuracy: traj.accuracy() }
    }
}

/// Running checks on emitted policy directions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub directions: u64,
    pub bound_violations: u64,
    pub max_direction_norm: f64,
    pub skipped_ratios: u64,
}

impl Diagnostics {
    pub(crate) fn record(&mut self, direction: &[f64], horizon: usize) {
        let n = norm(direction);
        self.directions += 1;
        self.max_direction_norm = self.max_direction_norm.max(n);
        if n > direction_bound(horizon) * (1.0 + 1e-12) {
            self.bound_violations += 1;
        }
    }
}

pub trait Agent: Send {
    /// One training iteration; returns every episode it simulated.
    fn train(&mut self, env: &mut dyn Environment, streams: &mut Streams) -> Result<Vec<EpisodeSummary>>;

    fn policy(&self) -> &PolicyParams;

    /// Current quantile estimate, for quantile-tracking algorithms.
    fn tracker(&self) -> Option<f64> {
        None
    }

    fn diagnostics(&self) -> Diagnostics {
        Diagnostics::default()
    }
}

/// Step-size state for the policy parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyOptimizer {
    kind: OptimizerKind,
    schedule: StepSchedule,
    adam: AdamState,
    steps: u64,
}

impl PolicyOptimizer {
    pub fn new(kind: OptimizerKind, schedule: StepSchedule, dim: usize) -> Self {
        Self { kind, schedule, adam: AdamState::new(dim, schedule.at(1, 0)), steps: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Moves `theta` along the ascent `direction` and projects onto the box.
    pub fn ascend(&mut self, theta: &mut [f64], direction: &[f64], episode: u64) -> Result<()> {
        if direction.iter().any(|v| !v.is_finite()) {
            return Err(Error::training("non-finite policy direction"));
        }
        let lr = self.schedule.at(self.steps + 1, episode);
        match self.kind {
            OptimizerKind::Adam => {
                self.adam.lr = lr;
                let neg: Vec<f64> = direction.iter().map(|v| -v).collect();
                self.adam.step(theta, &neg)?;
            }
            OptimizerKind::Sgd => {
                for (t, d) in theta.iter_mut().zip(direction) {
                    *t += lr * d;
                }
            }
        }
        project(theta, PARAM_BOUND);
        self.steps += 1;
        Ok(())
    }
}

/// Discounted returns of `episodes` pilot runs, truncated at each horizon in
/// `horizons`; the result is indexed `[horizon][episode]`.
pub(crate) fn pilot_returns(
    env: &mut dyn Environment,
    policy: &PolicyParams,
    discount: f64,
    episodes: usize,
    horizons: &[usize],
    streams: &mut Streams,
) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![Vec::with_capacity(episodes); horizons.len()];
    for _ in 0..episodes {
        let traj = rollout(env, policy, discount, &mut streams.env, &mut streams.policy, false)?;
        for (slot, &l) in out.iter_mut().zip(horizons) {
            slot.push(traj.prefix_return(l));
        }
    }
    Ok(out)
}

pub fn build_agent(cfg: &AlgoConfig, policy: PolicyParams, env: &dyn Environment, init_rng: &mut SimRng) -> Result<Box<dyn Agent>> {
    cfg.validate(env.horizon())?;
    Ok(match cfg.algo {
        AlgoKey::Qpo => Box::new(QpoAgent::new(cfg.clone(), policy)),
        AlgoKey::Qppo => Box::new(QppoAgent::new(cfg.clone(), policy, env, init_rng)?),
        AlgoKey::Reinforce => Box::new(ReinforceAgent::new(cfg.clone(), policy)),
        AlgoKey::Ppo => Box::new(PpoAgent::new(cfg.clone(), policy, env, init_rng)?),
        AlgoKey::Spsa => Box::new(SpsaAgent::new(cfg.clone(), policy)),
    })
}
