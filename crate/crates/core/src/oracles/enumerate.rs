use serde::{Deserialize, Serialize};

use crate::envs::{discounted_return, TabularMdp};
use crate::error::{Error, Result};
use crate::policy::{Action, PolicyParams};

pub const MAX_ENUM_STATES: usize = 3;
pub const MAX_ENUM_ACTIONS: usize = 3;
pub const MAX_ENUM_HORIZON: usize = 3;

/// Exact law of the discounted return of a small tabular MDP under a policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnDistribution {
    /// `(return, probability)` for every trajectory with positive probability.
    pub outcomes: Vec<(f64, f64)>,
    /// `∇θ log Π(τ; θ)` for each entry of `outcomes`.
    pub scores: Vec<Vec<f64>>,
}

impl ReturnDistribution {
    pub fn total_probability(&self) -> f64 {
        self.outcomes.iter().map(|o| o.1).sum()
    }

    /// `P(U ≤ r)`.
    pub fn cdf(&self, r: f64) -> f64 {
        self.outcomes.iter().filter(|o| o.0 <= r).map(|o| o.1).sum()
    }

    /// Smallest atom whose cumulative probability reaches `alpha`.
    pub fn quantile(&self, alpha: f64) -> f64 {
        let mut atoms = self.outcomes.clone();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        for (u, p) in &atoms {
            acc += p;
            if acc >= alpha - 1e-12 {
                return *u;
            }
        }
        atoms.last().map_or(f64::NAN, |a| a.0)
    }

    /// Exact `∇θ F(r; θ) = E[1{U ≤ r} ∇θ log Π(τ; θ)]`.
    pub fn cdf_gradient(&self, r: f64) -> Vec<f64> {
        let dim = self.scores.first().map_or(0, Vec::len);
        let mut g = vec![0.0; dim];
        for ((u, p), s) in self.outcomes.iter().zip(&self.scores) {
            if *u <= r {
                for (gi, si) in g.iter_mut().zip(s) {
                    *gi += p * si;
                }
            }
        }
        g
    }
}

struct Walk<'a> {
    mdp: &'a TabularMdp,
    policy: &'a PolicyParams,
    discount: f64,
    out: ReturnDistribution,
}

impl Walk<'_> {
    fn visit(&mut self, s: usize, prob: f64, rewards: &mut Vec<f64>, score: &[f64]) -> Result<()> {
        if rewards.len() == self.mdp.horizon {
            self.out.outcomes.push((discounted_return(rewards, self.discount), prob));
            self.out.scores.push(score.to_vec());
            return Ok(());
        }
        let obs = self.mdp.one_hot(s);
        let probs = self.policy.probabilities(&obs)?.remove(0);
        for (a, pa) in probs.iter().enumerate() {
            if *pa == 0.0 {
                continue;
            }
            let action = Action::Discrete(vec![a]);
            let step_score = self.policy.score(&obs, &action)?;
            let next_score: Vec<f64> = score.iter().zip(&step_score).map(|(x, y)| x + y).collect();
            rewards.push(self.mdp.reward[s][a]);
            for (s2, ps) in self.mdp.transition[s][a].iter().enumerate() {
                if *ps > 0.0 {
                    self.visit(s2, prob * pa * ps, rewards, &next_score)?;
                }
            }
            rewards.pop();
        }
        Ok(())
    }
}

/// Enumerates every trajectory of `mdp` under `policy`.
pub fn enumerate_small_mdp(mdp: &TabularMdp, policy: &PolicyParams, discount: f64) -> Result<ReturnDistribution> {
    mdp.validate()?;
    if mdp.states > MAX_ENUM_STATES || mdp.actions > MAX_ENUM_ACTIONS || mdp.horizon > MAX_ENUM_HORIZON {
        return Err(Error::config(format!(
            "enumeration limited to {MAX_ENUM_STATES} states, {MAX_ENUM_ACTIONS} actions, horizon {MAX_ENUM_HORIZON}"
        )));
    }
    if !(discount > 0.0 && discount <= 1.0) {
        return Err(Error::config(format!("discount {discount} outside (0, 1]")));
    }
    let mut walk = Walk { mdp, policy, discount, out: ReturnDistribution { outcomes: Vec::new(), scores: Vec::new() } };
    for (s0, p0) in mdp.initial.iter().enumerate() {
        if *p0 > 0.0 {
            walk.visit(s0, *p0, &mut Vec::with_capacity(mdp.horizon), &vec![0.0; policy.dim()])?;
        }
    }
    Ok(walk.out)
}
