use super::{descent_direction, pilot_returns, rollout, Agent, AlgoConfig, Diagnostics, EpisodeSummary, PolicyOptimizer, Streams};
use crate::envs::Environment;
use crate::error::Result;
use crate::policy::PolicyParams;
use crate::quantile::{warm_start, QuantileTracker};

/// On-policy two-timescale quantile optimizer: one episode per iteration,
/// one quantile update and one projected policy step.
#[derive(Clone, Debug)]
pub struct QpoAgent {
    cfg: AlgoConfig,
    policy: PolicyParams,
    tracker: Option<QuantileTracker>,
    optimizer: PolicyOptimizer,
    episode: u64,
    diagnostics: Diagnostics,
}

impl QpoAgent {
    pub fn new(cfg: AlgoConfig, policy: PolicyParams) -> Self {
        let optimizer = PolicyOptimizer::new(cfg.optimizer, cfg.policy_lr, policy.dim());
        Self { cfg, policy, tracker: None, optimizer, episode: 0, diagnostics: Diagnostics::default() }
    }

    /// Starts from an explicit quantile estimate instead of a pilot batch.
    pub fn with_tracker(mut self, q0: f64) -> Result<Self> {
        self.tracker = Some(QuantileTracker::new(q0, self.cfg.alpha, self.cfg.quantile_lr, self.cfg.quantile_optimizer)?);
        Ok(self)
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    fn ensure_tracker(&mut self, env: &mut dyn Environment, streams: &mut Streams) -> Result<()> {
        if self.tracker.is_none() {
            let h = env.horizon();
            let pilot = pilot_returns(env, &self.policy, self.cfg.discount, self.cfg.warm_start_episodes, &[h], streams)?;
            let q0 = warm_start(&pilot[0], self.cfg.alpha)?;
            self.tracker = Some(QuantileTracker::new(q0, self.cfg.alpha, self.cfg.quantile_lr, self.cfg.quantile_optimizer)?);
        }
        Ok(())
    }

    /// Simulates one episode under θ_k, then `q ← q + β(α − 1{U ≤ q})` and
    /// `θ ← φ(θ + γ D(τ; θ_k, q_k))`, both driven by the pre-update `q_k`.
    pub fn iteration(&mut self, env: &mut dyn Environment, streams: &mut Streams) -> Result<EpisodeSummary> {
        self.ensure_tracker(env, streams)?;
        let traj = rollout(env, &self.policy, self.cfg.discount, &mut streams.env, &mut streams.policy, false)?;
        let tracker = self.tracker.as_mut().expect("tracker initialized");
        let q = tracker.q();
        let direction = descent_direction(&traj, &self.policy, q)?;
        self.diagnostics.record(&direction, traj.len());
        tracker.set_episode(self.episode);
        tracker.update(traj.ret())?;
        self.optimizer.ascend(&mut self.policy.theta, &direction, self.episode)?;
        self.episode += 1;
        Ok(EpisodeSummary::of(&traj))
    }
}

impl Agent for QpoAgent {
    fn train(&mut self, env: &mut dyn Environment, streams: &mut Streams) -> Result<Vec<EpisodeSummary>> {
        Ok(vec![self.iteration(env, streams)?])
    }

    fn policy(&self) -> &PolicyParams {
        &self.policy
    }

    fn tracker(&self) -> Option<f64> {
        self.tracker.as_ref().map(QuantileTracker::q)
    }

    fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }
}
