use crate::envs::{discounted_return, Environment};
use crate::error::{Error, Result};
use crate::policy::{Action, PolicyParams};
use crate::SimRng;

/// One simulated episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// `s_0, ..., s_{T-1}`: the states actions were taken in.
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    /// Behaviour log-densities `log π(a_t|s_t)` recorded while acting.
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub optimal: Vec<Option<bool>>,
    pub discount: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Discounted return of the whole episode.
    pub fn ret(&self) -> f64 {
        discounted_return(&self.rewards, self.discount)
    }

    /// Discounted return of the first `l` steps.
    pub fn prefix_return(&self, l: usize) -> f64 {
        discounted_return(&self.rewards[..l.min(self.len())], self.discount)
    }

    /// Discounted reward-to-go from every step.
    pub fn rewards_to_go(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let mut acc = 0.0;
        for t in (0..self.len()).rev() {
            acc = self.rewards[t] + self.discount * acc;
            out[t] = acc;
        }
        out
    }

    /// Fraction of steps where the optimal action was chosen, when known.
    pub fn accuracy(&self) -> Option<f64> {
        let known: Vec<bool> = self.optimal.iter().filter_map(|o| *o).collect();
        if known.is_empty() {
            None
        } else {
            Some(known.iter().filter(|b| **b).count() as f64 / known.len() as f64)
        }
    }

    pub fn states(&self) -> Vec<&[f64]> {
        self.observations.iter().map(Vec::as_slice).collect()
    }

    pub fn action_refs(&self) -> Vec<&Action> {
        self.actions.iter().collect()
    }
}

/// Runs one full-horizon episode. Environment noise and action sampling
/// draw from separate streams; `greedy` takes mode actions and leaves the
/// policy stream untouched.
pub fn rollout(
    env: &mut dyn Environment,
    policy: &PolicyParams,
    discount: f64,
    env_rng: &mut SimRng,
    policy_rng: &mut SimRng,
    greedy: bool,
) -> Result<Trajectory> {
    if !(discount > 0.0 && discount <= 1.0) {
        return Err(Error::config(format!("discount {discount} outside (0, 1]")));
    }
    let horizon = env.horizon();
    let mut obs = env.reset(env_rng);
    let mut traj = Trajectory {
        observations: Vec::with_capacity(horizon),
        actions: Vec::with_capacity(horizon),
        log_probs: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
        optimal: Vec::with_capacity(horizon),
        discount,
    };
    for _ in 0..horizon {
        let (action, logp) = if greedy { (policy.mode(&obs)?, f64::NAN) } else { policy.act(&obs, policy_rng)? };
        let out = env.step(&action, env_rng)?;
        if !out.reward.is_finite() {
            return Err(Error::training("environment produced a non-finite reward"));
        }
        traj.observations.push(std::mem::replace(&mut obs, out.observation));
        traj.actions.push(action);
        traj.log_probs.push(logp);
        traj.rewards.push(out.reward);
        traj.optimal.push(out.optimal);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{ZeroMean, ZeroMeanParams};
    use crate::policy::{ActionSpec, Arch, Network, PolicyInit};
    use rand::SeedableRng;

    #[test]
    fn rewards_to_go_and_prefix_returns() {
        let traj = Trajectory {
            observations: vec![vec![]; 3],
            actions: vec![Action::Discrete(vec![0]); 3],
            log_probs: vec![0.0; 3],
            rewards: vec![1.0, 2.0, 4.0],
            optimal: vec![Some(true), Some(false), None],
            discount: 0.5,
        };
        assert_eq!(traj.rewards_to_go(), vec![3.0, 4.0, 4.0]);
        assert_eq!(traj.prefix_return(2), 2.0);
        assert_eq!(traj.ret(), 3.0);
        assert_eq!(traj.accuracy(), Some(0.5));
    }

    #[test]
    fn rollout_records_consistent_log_densities() {
        let mut env = ZeroMean::new(ZeroMeanParams::simple()).unwrap();
        let net = Network::new(Arch::mlp(3, &[8, 8], 3)).unwrap();
        let mut rng = SimRng::seed_from_u64(0);
        let p =
            PolicyParams::init(net, ActionSpec::Categorical { n: 3 }, PolicyInit { head_scale: 1.0, init_log_std: 0.0 }, &mut rng).unwrap();
        let (mut e, mut a) = (SimRng::seed_from_u64(1), SimRng::seed_from_u64(2));
        let traj = rollout(&mut env, &p, 0.99, &mut e, &mut a, false).unwrap();
        assert_eq!(traj.len(), 20);
        let recomputed = p.log_probs(&traj.states(), &traj.action_refs()).unwrap();
        assert_eq!(recomputed, traj.log_probs);
    }
}
