use rand::seq::SliceRandom;

use super::{clip_aggregate, rollout, Agent, AlgoConfig, EpisodeSummary, PolicyOptimizer, Streams, SurrogateTerm};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::policy::{Action, BaselineNet, PolicyParams};
use crate::SimRng;

struct Sample {
    obs: Vec<f64>,
    action: Action,
    log_prob: f64,
    reward_to_go: f64,
    t: usize,
}

/// Clipped-ratio PPO on the mean criterion with advantage equal to the
/// discounted reward-to-go minus a learned state-value baseline.
#[derive(Clone, Debug)]
pub struct PpoAgent {
    cfg: AlgoConfig,
    policy: PolicyParams,
    value: BaselineNet,
    optimizer: PolicyOptimizer,
    episode: u64,
}

impl PpoAgent {
    pub fn new(cfg: AlgoConfig, policy: PolicyParams, env: &dyn Environment, init_rng: &mut SimRng) -> Result<Self> {
        let value = BaselineNet::new(env.observation_len(), &cfg.baseline_hidden, env.horizon() as f64, cfg.baseline_lr, init_rng)?
            .with_output_scale(cfg.value_scale);
        let optimizer = PolicyOptimizer::new(cfg.optimizer, cfg.policy_lr, policy.dim());
        Ok(Self { cfg, policy, value, optimizer, episode: 0 })
    }

    /// Collects whole episodes until the buffer holds at least
    /// `update_interval` steps, then runs the minibatch epochs.
    pub fn update(&mut self, env: &mut dyn Environment, streams: &mut Streams) -> Result<Vec<EpisodeSummary>> {
        let mut buffer = Vec::with_capacity(self.cfg.update_interval + env.horizon());
        let mut episodes = Vec::new();
        while buffer.len() < self.cfg.update_interval {
            let traj = rollout(env, &self.policy, self.cfg.discount, &mut streams.env, &mut streams.policy, false)?;
            episodes.push(EpisodeSummary::of(&traj));
            let rtg = traj.rewards_to_go();
            for (t, ((obs, action), (lp, g))) in
                traj.observations.into_iter().zip(traj.actions).zip(traj.log_probs.into_iter().zip(rtg)).enumerate()
            {
                buffer.push(Sample { obs, action, log_prob: lp, reward_to_go: g, t });
            }
        }

        let batch: Vec<(&[f64], usize)> = buffer.iter().map(|s| (s.obs.as_slice(), s.t)).collect();
        let values = self.value.eval_batch(&batch)?;
        let mut adv: Vec<f64> = buffer.iter().zip(&values).map(|(s, v)| s.reward_to_go - v).collect();
        let n = adv.len() as f64;
        let mean = adv.iter().sum::<f64>() / n;
        let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
        for a in &mut adv {
            *a = (*a - mean) / (std + 1e-8);
        }

        let mut order: Vec<usize> = (0..buffer.len()).collect();
        let horizon = env.horizon();
        for _ in 0..self.cfg.epochs {
            order.shuffle(&mut streams.shuffle);
            for chunk in order.chunks(self.cfg.minibatch) {
                let states: Vec<&[f64]> = chunk.iter().map(|&i| buffer[i].obs.as_slice()).collect();
                let actions: Vec<&Action> = chunk.iter().map(|&i| &buffer[i].action).collect();
                let logps = self.policy.log_probs(&states, &actions)?;
                let m = chunk.len() as f64;
                let weights: Vec<f64> = chunk
                    .iter()
                    .zip(&logps)
                    .map(|(&i, lp)| {
                        let ratio = (lp - buffer[i].log_prob).exp();
                        let term = SurrogateTerm { ratio, target: adv[i], clip: self.cfg.clip };
                        if ratio.is_finite() && term.gradient_active() {
                            adv[i] * ratio / m
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let (_, mut grad) = self.policy.weighted_score(&states, &actions, &weights)?;
                if grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::training("non-finite PPO gradient"));
                }
                clip_aggregate(&mut grad, horizon);
                self.optimizer.ascend(&mut self.policy.theta, &grad, self.episode)?;
                let fit: Vec<(&[f64], usize, f64)> =
                    chunk.iter().map(|&i| (buffer[i].obs.as_slice(), buffer[i].t, buffer[i].reward_to_go)).collect();
                self.value.fit(&fit)?;
            }
        }
        self.episode += episodes.len() as u64;
        Ok(episodes)
    }
}

impl Agent for PpoAgent {
    fn train(&mut self, env: &mut dyn Environment, streams: &mut Streams) -> Result<Vec<EpisodeSummary>> {
        self.update(env, streams)
    }

    fn policy(&self) -> &PolicyParams {
        &self.policy
    }
}
