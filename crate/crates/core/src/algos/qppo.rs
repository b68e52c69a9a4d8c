use rand::seq::SliceRandom;

use super::{
    clip_aggregate, pilot_returns, ratio_from_log_probs, rollout, Agent, AlgoConfig, Diagnostics, EpisodeSummary, PolicyOptimizer, Streams,
    SurrogateTerm,
};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::policy::{BaselineNet, PolicyParams};
use crate::quantile::{warm_start, QuantileBank};
use crate::SimRng;

/// Off-policy variant: one behaviour episode, then one clipped-surrogate
/// step per truncated horizon in shuffled order.
#[derive(Clone, Debug)]
pub struct QppoAgent {
    cfg: AlgoConfig,
    policy: PolicyParams,
    bank: Option<QuantileBank>,
    baseline: BaselineNet,
    optimizer: PolicyOptimizer,
    horizon: usize,
    episode: u64,
    inner_updates: u64,
    diagnostics: Diagnostics,
}

impl QppoAgent {
    pub fn new(cfg: AlgoConfig, policy: PolicyParams, env: &dyn Environment, init_rng: &mut SimRng) -> Result<Self> {
        let horizon = env.horizon();
        if cfg.truncation == 0 || cfg.truncation > horizon {
            return Err(Error::config(format!("truncation {} outside [1, {horizon}]", cfg.truncation)));
        }
        let baseline = BaselineNet::new(env.observation_len(), &cfg.baseline_hidden, horizon as f64, cfg.baseline_lr, init_rng)?
            .with_target_range(-1.0, 0.0);
        let optimizer = PolicyOptimizer::new(cfg.optimizer, cfg.policy_lr, policy.dim());
        Ok(Self {
            cfg,
            policy,
            bank: None,
            baseline,
            optimizer,
            horizon,
            episode: 0,
            inner_updates: 0,
            diagnostics: Diagnostics::default(),
        })
    }

    pub fn horizons(&self) -> Vec<usize> {
        (self.cfg.truncation..=self.horizon).collect()
    }

    pub fn bank(&self) -> Option<&QuantileBank> {
        self.bank.as_ref()
    }

    pub fn inner_updates(&self) -> u64 {
        self.inner_updates
    }

    fn ensure_bank(&mut self, env: &mut dyn Environment, streams: &mut Streams) -> Result<()> {
        if self.bank.is_none() {
            let horizons = self.horizons();
            let pilot = pilot_returns(env, &self.policy, self.cfg.discount, self.cfg.warm_start_episodes, &horizons, streams)?;
            let q0 = pilot.iter().map(|r| warm_start(r, self.cfg.alpha)).collect::<Result<Vec<_>>>()?;
            self.bank =
                Some(QuantileBank::new(&q0, self.cfg.truncation, self.cfg.alpha, self.cfg.quantile_lr, self.cfg.quantile_optimizer)?);
        }
        Ok(())
    }

    pub fn episode_update(&mut self, env: &mut dyn Environment, streams: &mut Streams) -> Result<EpisodeSummary> {
        self.ensure_bank(env, streams)?;
        let traj = rollout(env, &self.policy, self.cfg.discount, &mut streams.env, &mut streams.policy, false)?;
        let mut order = self.horizons();
        order.shuffle(&mut streams.shuffle);
        let states = traj.states();
        let actions = traj.action_refs();
        let s0 = traj.observations[0].clone();
        let bank = self.bank.as_mut().expect("bank initialized");
        bank.set_episode(self.episode);

        for l in order {
            let ones = vec![1.0; l];
            let ret = traj.prefix_return(l);
            let q_old = bank.get(l)?;
            let hit = if ret <= q_old { 1.0 } else { 0.0 };
            let advantage = -hit - self.baseline.eval(&s0, l)?;
            for step in 0..self.cfg.surrogate_steps {
                let (logps, score_sum) = self.policy.weighted_score(&states[..l], &actions[..l], &ones)?;
                let ratio = ratio_from_log_probs(&logps, &traj.log_probs[..l])?;
                if step == 0 && bank.update_weighted(l, ret, ratio)?.is_none() {
                    self.diagnostics.skipped_ratios += 1;
                }
                let term = SurrogateTerm { ratio, target: advantage, clip: self.cfg.clip };
                if !(ratio.is_finite() && term.gradient_active()) {
                    // clipped: the surrogate no longer depends on θ for this sample
                    self.diagnostics.record(&vec![0.0; score_sum.len()], l);
                    break;
                }
                let mut direction: Vec<f64> = score_sum.iter().map(|g| advantage * ratio * g).collect();
                clip_aggregate(&mut direction, l);
                self.diagnostics.record(&direction, l);
                self.optimizer.ascend(&mut self.policy.theta, &direction, self.episode)?;
            }
            self.baseline.fit(&[(&s0, l, -hit)])?;
            self.inner_updates += 1;
        }
        self.episode += 1;
        Ok(EpisodeSummary::of(&traj))
    }
}

impl Agent for QppoAgent {
    fn train(&mut self, env: &mut dyn Environment, streams: &mut Streams) -> Result<Vec<EpisodeSummary>> {
        Ok(vec![self.episode_update(env, streams)?])
    }

    fn policy(&self) -> &PolicyParams {
        &self.policy
    }

    fn tracker(&self) -> Option<f64> {
        self.bank.as_ref().map(|b| *b.values().last().expect("non-empty bank"))
    }

    fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }
}
