use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::policy::{Action, ActionSpec};
use crate::SimRng;

/// Finite MDP with deterministic rewards `reward[s][a]` and transition rows
/// `transition[s][a]`. Observations are one-hot state indicators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub initial: Vec<f64>,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<f64>>,
    #[serde(skip)]
    current: usize,
}

fn pick(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

impl TabularMdp {
    pub fn new(initial: Vec<f64>, transition: Vec<Vec<Vec<f64>>>, reward: Vec<Vec<f64>>, horizon: usize) -> Result<Self> {
        let m =
            Self { states: initial.len(), actions: reward.first().map_or(0, Vec::len), horizon, initial, transition, reward, current: 0 };
        m.validate()?;
        Ok(m)
    }

    /// Two states, two actions, two steps. From either state the first action
    /// pays 0 and the second pays 1 (state 0) or 2 (state 1); the next state
    /// leans toward the action index.
    pub fn two_action_bandit() -> Self {
        Self::new(
            vec![0.6, 0.4],
            vec![vec![vec![0.8, 0.2], vec![0.3, 0.7]], vec![vec![0.5, 0.5], vec![0.1, 0.9]]],
            vec![vec![0.0, 1.0], vec![0.0, 2.0]],
            2,
        )
        .expect("valid bandit")
    }

    pub fn validate(&self) -> Result<()> {
        let stoch = |row: &[f64]| row.iter().all(|p| p.is_finite() && *p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        if self.states == 0 || self.actions == 0 || self.horizon == 0 {
            return Err(Error::config("tabular MDP needs states, actions and a horizon"));
        }
        if self.initial.len() != self.states || !stoch(&self.initial) {
            return Err(Error::config("initial distribution must be a probability vector over states"));
        }
        let shaped = self.transition.len() == self.states
            && self.reward.len() == self.states
            && self.transition.iter().all(|r| r.len() == self.actions && r.iter().all(|p| p.len() == self.states && stoch(p)))
            && self.reward.iter().all(|r| r.len() == self.actions && r.iter().all(|v| v.is_finite()));
        if !shaped {
            return Err(Error::config("transition rows must be distributions and rewards finite"));
        }
        Ok(())
    }

    pub fn one_hot(&self, s: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.states];
        v[s] = 1.0;
        v
    }
}

impl Environment for TabularMdp {
    fn observation_shape(&self) -> Vec<usize> {
        vec![self.states]
    }

    fn action_spec(&self) -> ActionSpec {
        ActionSpec::Categorical { n: self.actions }
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&mut self, rng: &mut SimRng) -> Vec<f64> {
        self.current = pick(&self.initial, rng.random());
        self.one_hot(self.current)
    }

    fn step(&mut self, action: &Action, rng: &mut SimRng) -> Result<StepOutcome> {
        let a = match action.index() {
            Some(a) if a < self.actions => a,
            _ => return Err(Error::usage(format!("tabular action {action:?} out of range"))),
        };
        let reward = self.reward[self.current][a];
        self.current = pick(&self.transition[self.current][a], rng.random());
        Ok(StepOutcome { observation: self.one_hot(self.current), reward, optimal: None })
    }

    fn reward_bound(&self) -> Option<f64> {
        self.reward.iter().flatten().map(|r| r.abs()).reduce(f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn bandit_is_valid_and_steps() {
        let mut m = TabularMdp::two_action_bandit();
        let mut rng = SimRng::seed_from_u64(0);
        let obs = m.reset(&mut rng);
        assert_eq!(obs.iter().sum::<f64>(), 1.0);
        let out = m.step(&Action::Discrete(vec![0]), &mut rng).unwrap();
        assert_eq!(out.reward, 0.0);
        assert!(m.step(&Action::Discrete(vec![2]), &mut rng).is_err());
    }

    #[test]
    fn malformed_rows_rejected() {
        assert!(TabularMdp::new(vec![1.0], vec![vec![vec![0.5]]], vec![vec![0.0]], 1).is_err());
        assert!(TabularMdp::new(vec![0.5, 0.5], vec![vec![vec![1.0, 0.0]]], vec![vec![0.0]], 1).is_err());
    }
}
