use super::{rollout, Agent, AlgoConfig, EpisodeSummary, PolicyOptimizer, Streams};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::policy::PolicyParams;

/// Monte-Carlo policy gradient on the mean return, with reward-to-go
/// weights and no baseline.
#[derive(Clone, Debug)]
pub struct ReinforceAgent {
    cfg: AlgoConfig,
    policy: PolicyParams,
    optimizer: PolicyOptimizer,
    episode: u64,
}

impl ReinforceAgent {
    pub fn new(cfg: AlgoConfig, policy: PolicyParams) -> Self {
        let optimizer = PolicyOptimizer::new(cfg.optimizer, cfg.policy_lr, policy.dim());
        Self { cfg, policy, optimizer, episode: 0 }
    }

    pub fn iteration(&mut self, env: &mut dyn Environment, streams: &mut Streams) -> Result<EpisodeSummary> {
        let traj = rollout(env, &self.policy, self.cfg.discount, &mut streams.env, &mut streams.policy, false)?;
        let weights = traj.rewards_to_go();
        let (_, grad) = self.policy.weighted_score(&traj.states(), &traj.action_refs(), &weights)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::training("non-finite policy gradient"));
        }
        self.optimizer.ascend(&mut self.policy.theta, &grad, self.episode)?;
        self.episode += 1;
        Ok(EpisodeSummary::of(&traj))
    }
}

impl Agent for ReinforceAgent {
    fn train(&mut self, env: &mut dyn Environment, streams: &mut Streams) -> Result<Vec<EpisodeSummary>> {
        Ok(vec![self.iteration(env, streams)?])
    }

    fn policy(&self) -> &PolicyParams {
        &self.policy
    }
}
